"""End-to-end command line tests, driving main(argv) in-process."""

import json
import math
import os

import numpy as np
import pytest

from thetaconf.cli import DEFAULT_THETAS, main
from thetaconf.confsym import (
    DoyleSpec,
    LatticeSpec,
    doyle_quad_from_angles,
    gen_doyle,
    gen_lattice,
    matched_lattice_angles,
)
from thetaconf.crossratio import CrossRatioField, theta_residual
from thetaconf.geom import MoebiusMap, apply_moebius
from thetaconf.layout import similarity_deviation

from conftest import equilateral_pair_mesh

ANGLES6 = (0.9, 1.1, math.pi - 2.0, 0.75, 1.3, math.pi - 2.05)


def dump(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def mesh_obj(mesh):
    return {
        "vertices": [[float(z.real), float(z.imag)] for z in mesh.vertices],
        "triangles": mesh.triangles.tolist(),
    }


def complex_vertices(obj):
    return np.array([complex(a, b) for a, b in obj["vertices"]])


@pytest.fixture
def lattice_mesh_file(tmp_path):
    params = dump(
        tmp_path / "lat_params.json",
        {"alpha": math.pi / 3, "beta": math.pi / 3, "rows": 5, "cols": 5},
    )
    out = str(tmp_path / "lattice.json")
    assert main(["gen", "lattice", params, out, "--quiet"]) == 0
    return out


def hexagon_mesh_obj():
    ring = [np.exp(1j * k * np.pi / 3) for k in range(6)]
    verts = [[0.0, 0.0]] + [[float(z.real), float(z.imag)] for z in ring]
    tris = [[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)]
    return {"vertices": verts, "triangles": tris}


class TestGen:
    def test_lattice_counts(self, lattice_mesh_file):
        obj = load(lattice_mesh_file)
        assert len(obj["vertices"]) == 25
        assert len(obj["triangles"]) == 32

    def test_doyle_unit_square_quad_is_flat_grid(self, tmp_path):
        params = dump(
            tmp_path / "p.json",
            {"quad": [[0, 0], [1, 0], [1, 1], [0, 1]], "rows": 4, "cols": 4},
        )
        out = str(tmp_path / "d.json")
        assert main(["gen", "doyle", params, out, "--quiet"]) == 0
        got = np.sort_complex(complex_vertices(load(out)))
        want = np.sort_complex(np.array([n + 1j * m for m in range(4) for n in range(4)]))
        assert np.abs(got - want).max() < 1e-12

    def test_doyle_angles_match_library_generator(self, tmp_path):
        params = dump(
            tmp_path / "p.json",
            {"angles": list(ANGLES6), "scale": 2.0, "rows": 5, "cols": 4},
        )
        out = str(tmp_path / "d.json")
        assert main(["gen", "doyle", params, out, "--quiet"]) == 0
        direct = gen_doyle(
            DoyleSpec(quad=doyle_quad_from_angles(ANGLES6, scale=2.0), rows=5, cols=4)
        )
        obj = load(out)
        assert obj["triangles"] == direct.triangles.tolist()
        assert np.abs(complex_vertices(obj) - direct.vertices).max() == 0.0

    def test_confsym_full_growth(self, tmp_path):
        w = complex(np.exp(2j * np.pi / 3))
        params = dump(
            tmp_path / "p.json",
            {"a": [w.real, w.imag], "b": [w.real, w.imag], "c": [w.real, w.imag],
             "rows": 6, "cols": 6},
        )
        out = str(tmp_path / "cs.json")
        assert main(["gen", "confsym", params, out, "--quiet"]) == 0
        obj = load(out)
        assert obj["growth"]["ok"] is True
        assert obj["growth"]["n_placed"] == 36
        assert len(obj["vertices"]) == 36

    def test_confsym_degeneration_yields_partial_mesh(self, tmp_path):
        w = complex(np.exp(1j * (2 / 3 + 1 / 40) * np.pi))
        params = dump(
            tmp_path / "p.json",
            {"a": [w.real, w.imag], "b": [w.real, w.imag], "c": [w.real, w.imag],
             "rows": 16, "cols": 16},
        )
        out = str(tmp_path / "cs.json")
        assert main(["gen", "confsym", params, out, "--quiet"]) == 0
        obj = load(out)
        growth = obj["growth"]
        assert growth["ok"] is False
        assert 0 < growth["n_placed"] < 256
        assert growth["failures"]
        assert len(obj["vertices"]) == growth["n_placed"]
        tris = np.asarray(obj["triangles"])
        assert tris.size > 0
        assert tris.max() < growth["n_placed"]

    def test_missing_parameter_exits_2(self, tmp_path):
        params = dump(tmp_path / "p.json", {"alpha": 1.0, "rows": 5, "cols": 5})
        assert main(["gen", "lattice", params, str(tmp_path / "x.json"), "--quiet"]) == 2

    def test_malformed_json_exits_2(self, tmp_path):
        bad = tmp_path / "p.json"
        bad.write_text("{nope")
        assert main(["gen", "lattice", str(bad), str(tmp_path / "x.json"), "--quiet"]) == 2

    def test_unknown_kind_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(["gen", "spiral", "p.json", "x.json"])
        assert info.value.code == 2
        capsys.readouterr()


class TestAnalyze:
    def test_equilateral_lattice_report(self, tmp_path, lattice_mesh_file):
        out = str(tmp_path / "an.json")
        assert main(["analyze", lattice_mesh_file, out, "--quiet"]) == 0
        rep = load(out)
        assert rep["mesh"] == {
            "n_vertices": 25,
            "n_triangles": 32,
            "n_edges": 56,
            "n_interior_edges": 40,
        }
        logs = np.array([complex(*row["log"]) for row in rep["cross_ratios"]])
        assert np.abs(logs.real).max() < 1e-12
        assert np.abs(logs.imag - 2 * np.pi / 3).max() < 1e-12
        assert len(rep["flower_closing"]) == 9
        for fc in rep["flower_closing"]:
            assert fc["ok"] is True
            assert fc["valence"] == 6
            assert abs(fc["holonomy_defect"]) < 1e-12
        for cs in rep["conformal_symmetry"]:
            assert cs["symmetric"] is True
        assert rep["immersion"]["ok"] is True
        assert rep["immersion"]["failures"] == []
        assert "theta_residuals" not in rep

    def test_moebius_image_has_tiny_residuals_for_all_thetas(self, tmp_path, lattice_mesh_file):
        src = load(lattice_mesh_file)
        m = MoebiusMap(a=1.1 * np.exp(0.2j), b=0.1, c=0.02, d=1.0)
        img = apply_moebius(complex_vertices(src), m)
        img_file = dump(
            tmp_path / "img.json",
            {"vertices": [[float(z.real), float(z.imag)] for z in img],
             "triangles": src["triangles"]},
        )
        out = str(tmp_path / "an.json")
        assert main(["analyze", img_file, out, "--ref", lattice_mesh_file, "--quiet"]) == 0
        rows = load(out)["theta_residuals"]
        assert [row["theta"] for row in rows] == [pytest.approx(t) for t in DEFAULT_THETAS]
        for row in rows:
            assert row["max"] < 1e-10
            assert len(row["per_edge"]) == 40

    def test_theta_flag_selects_values(self, tmp_path, lattice_mesh_file):
        out = str(tmp_path / "an.json")
        rc = main(["analyze", lattice_mesh_file, out, "--ref", lattice_mesh_file,
                   "--theta", "0", "--theta", "1.0", "--quiet"])
        assert rc == 0
        rows = load(out)["theta_residuals"]
        assert [row["theta"] for row in rows] == [0.0, 1.0]

    def test_combinatorics_mismatch_exits_2(self, tmp_path, lattice_mesh_file):
        other = dump(
            tmp_path / "tiny.json",
            {"vertices": [[0, 0], [1, 0], [0, 1]], "triangles": [[0, 1, 2]]},
        )
        rc = main(["analyze", lattice_mesh_file, str(tmp_path / "an.json"),
                   "--ref", other, "--quiet"])
        assert rc == 2


class TestSolve:
    def test_zero_targets_is_identity(self, tmp_path, lattice_mesh_file):
        targets = tmp_path / "t.json"
        targets.write_text("null")
        prefix = str(tmp_path / "s0")
        rc = main(["solve", lattice_mesh_file, str(targets), "--out-prefix", prefix, "--quiet"])
        assert rc == 0
        rep = load(prefix + ".report.json")
        assert rep["solver"]["converged"] is True
        assert rep["solver"]["iterations"] == 0
        assert rep["layout"]["max_gluing_mismatch"] < 1e-12
        assert np.abs(np.asarray(load(prefix + ".omega.json")["omega"])).max() == 0.0
        src = complex_vertices(load(lattice_mesh_file))
        out = complex_vertices(load(prefix + ".mesh.json"))
        assert np.abs(out - src).max() < 1e-9

    def test_single_edge_target_round_trip(self, tmp_path, lattice_mesh_file):
        # edge {1, 5} is interior with both endpoints on the boundary, so a
        # lone target on it violates no flower sum and a seamless image exists
        targets = dump(tmp_path / "t.json", {"edges": [[1, 5]], "values": [0.05]})
        prefix = str(tmp_path / "s1")
        rc = main(["solve", lattice_mesh_file, targets, "--theta", str(math.pi / 3),
                   "--out-prefix", prefix, "--quiet"])
        assert rc == 0
        rep = load(prefix + ".report.json")
        assert rep["solver"]["converged"] is True
        assert rep["solver"]["iterations"] <= 25
        assert rep["layout"]["max_gluing_mismatch"] < 1e-9
        assert rep["layout"]["max_theta_residual_vs_targets"] < 1e-9
        assert rep["layout"]["all_flowers_embedded"] is True
        om = load(prefix + ".omega.json")
        assert len(om["edges"]) == len(om["omega"]) == 56
        assert om["theta"] == pytest.approx(math.pi / 3)

    def test_outputs_are_byte_deterministic(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[1, 5]], "values": [0.05]})
        pa, pb = str(tmp_path / "a"), str(tmp_path / "b")
        for prefix in (pa, pb):
            rc = main(["solve", lattice_mesh_file, targets, "--theta", str(math.pi / 3),
                       "--out-prefix", prefix, "--quiet"])
            assert rc == 0
        for suffix in (".omega.json", ".report.json", ".mesh.json"):
            with open(pa + suffix, "rb") as fa, open(pb + suffix, "rb") as fb:
                assert fa.read() == fb.read()

    def test_unbalanced_all_free_targets_exit_3(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[1, 5]], "values": [0.05]})
        rc = main(["solve", lattice_mesh_file, targets, "--no-fix-boundary",
                   "--pin", "mean", "--out-prefix", str(tmp_path / "sf"), "--quiet"])
        assert rc == 3

    def test_iteration_cap_exits_4_with_report(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[1, 5]], "values": [0.05]})
        prefix = str(tmp_path / "sm")
        rc = main(["solve", lattice_mesh_file, targets, "--theta", str(math.pi / 3),
                   "--max-iter", "1", "--out-prefix", prefix, "--quiet"])
        assert rc == 4
        rep = load(prefix + ".report.json")
        assert rep["solver"]["converged"] is False
        assert rep["solver"]["iterations"] == 1
        assert not os.path.exists(prefix + ".mesh.json")

    def test_unrealizable_targets_still_solve_but_leave_seams(self, tmp_path, lattice_mesh_file):
        rng = np.random.default_rng(5)
        targets = dump(tmp_path / "t.json", {"targets": list(rng.uniform(-0.03, 0.03, 40))})
        prefix = str(tmp_path / "su")
        rc = main(["solve", lattice_mesh_file, targets, "--theta", str(math.pi / 2),
                   "--out-prefix", prefix, "--quiet"])
        assert rc == 0
        rep = load(prefix + ".report.json")
        assert rep["solver"]["converged"] is True
        assert rep["layout"]["max_gluing_mismatch"] > 1e-4

    def test_doyle_spiral_reproduced_from_targets(self, tmp_path):
        rows = cols = 8
        spiral = gen_doyle(DoyleSpec(quad=doyle_quad_from_angles(ANGLES6), rows=rows, cols=cols))
        al, be = matched_lattice_angles(ANGLES6)
        lat = gen_lattice(LatticeSpec(alpha=al, beta=be, rows=rows, cols=cols))
        assert np.array_equal(spiral.triangles, lat.triangles)
        mesh_file = dump(tmp_path / "lat.json", mesh_obj(lat))

        theta = math.pi / 2
        ref = CrossRatioField.from_positions(lat)
        img = CrossRatioField.from_positions(lat, positions=spiral.vertices)
        ids = lat.interior_edge_ids
        t = theta_residual(img.logs[ids], ref.logs[ids], theta)
        targets = dump(tmp_path / "t.json", {"targets": [float(v) for v in t]})

        # measured per-edge scale change: |w_img| / |w_src| = exp(-omega)
        w_src = lat.vertices[lat.edges[:, 1]] - lat.vertices[lat.edges[:, 0]]
        w_img = spiral.vertices[lat.edges[:, 1]] - spiral.vertices[lat.edges[:, 0]]
        om = np.log(np.abs(w_src) / np.abs(w_img))
        bids = lat.boundary_edge_ids
        fixed = dump(
            tmp_path / "fo.json",
            {"edges": [[int(a), int(b)] for a, b in lat.edges[bids]],
             "values": [float(om[e]) for e in bids]},
        )
        # warm start near the measured interior values; a cold start at zero
        # is outside the feasible region for these boundary scales
        rng = np.random.default_rng(11)
        init = dump(
            tmp_path / "io.json",
            {"edges": [[int(a), int(b)] for a, b in lat.edges[ids]],
             "values": [float(om[e] + 0.01 * rng.standard_normal()) for e in ids]},
        )
        prefix = str(tmp_path / "sd")
        rc = main(["solve", mesh_file, targets, "--theta", str(theta),
                   "--fixed-omega", fixed, "--init-omega", init,
                   "--out-prefix", prefix, "--quiet"])
        assert rc == 0
        rep = load(prefix + ".report.json")
        assert rep["solver"]["converged"] is True
        assert rep["layout"]["max_gluing_mismatch"] < 1e-10

        laid = complex_vertices(load(prefix + ".mesh.json"))
        dev = similarity_deviation(laid, spiral.vertices)
        assert dev / np.abs(spiral.vertices).max() < 1e-9
        got_om = np.asarray(load(prefix + ".omega.json")["omega"])
        assert np.abs(got_om - om).max() < 1e-9

    def test_cold_start_outside_feasible_region_exits_3(self, tmp_path):
        rows = cols = 8
        spiral = gen_doyle(DoyleSpec(quad=doyle_quad_from_angles(ANGLES6), rows=rows, cols=cols))
        al, be = matched_lattice_angles(ANGLES6)
        lat = gen_lattice(LatticeSpec(alpha=al, beta=be, rows=rows, cols=cols))
        mesh_file = dump(tmp_path / "lat.json", mesh_obj(lat))
        targets = tmp_path / "t.json"
        targets.write_text("null")
        w_src = lat.vertices[lat.edges[:, 1]] - lat.vertices[lat.edges[:, 0]]
        w_img = spiral.vertices[lat.edges[:, 1]] - spiral.vertices[lat.edges[:, 0]]
        om = np.log(np.abs(w_src) / np.abs(w_img))
        bids = lat.boundary_edge_ids
        fixed = dump(
            tmp_path / "fo.json",
            {"edges": [[int(a), int(b)] for a, b in lat.edges[bids]],
             "values": [float(om[e]) for e in bids]},
        )
        rc = main(["solve", mesh_file, str(targets), "--theta", str(math.pi / 2),
                   "--fixed-omega", fixed, "--out-prefix", str(tmp_path / "sc"), "--quiet"])
        assert rc == 3

    def test_boundary_edge_target_exits_2(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[0, 1]], "values": [0.05]})
        rc = main(["solve", lattice_mesh_file, targets,
                   "--out-prefix", str(tmp_path / "sx"), "--quiet"])
        assert rc == 2

    def test_non_edge_target_exits_2(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[0, 6]], "values": [0.05]})
        rc = main(["solve", lattice_mesh_file, targets,
                   "--out-prefix", str(tmp_path / "sx"), "--quiet"])
        assert rc == 2

    def test_wrong_target_count_exits_2(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", [0.0, 0.1])
        rc = main(["solve", lattice_mesh_file, targets,
                   "--out-prefix", str(tmp_path / "sx"), "--quiet"])
        assert rc == 2


class TestRender:
    def test_two_triangle_counts(self, tmp_path):
        mesh_file = dump(tmp_path / "m.json", mesh_obj(equilateral_pair_mesh()))
        out = tmp_path / "m.svg"
        assert main(["render", mesh_file, str(out), "--quiet"]) == 0
        svg = out.read_text()
        assert svg.count("<polygon") == 2
        assert svg.count("<line") == 5
        assert 'class="circumcircle"' not in svg
        assert 'class="vertex"' not in svg

    def test_circumcircles_and_vertex_markers(self, tmp_path):
        mesh_file = dump(tmp_path / "hex.json", hexagon_mesh_obj())
        out = tmp_path / "hex.svg"
        rc = main(["render", mesh_file, str(out), "--circumcircles",
                   "--vertex-radius", "0.01", "--quiet"])
        assert rc == 0
        svg = out.read_text()
        assert svg.count("<polygon") == 6
        assert svg.count("<line") == 12
        assert svg.count('class="circumcircle"') == 6
        assert svg.count('class="vertex"') == 7

    def test_byte_deterministic(self, tmp_path):
        mesh_file = dump(tmp_path / "hex.json", hexagon_mesh_obj())
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        for out in (a, b):
            assert main(["render", mesh_file, str(out), "--circumcircles", "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_severity_colors_from_analysis_report(self, tmp_path, lattice_mesh_file):
        spiral = gen_doyle(DoyleSpec(quad=doyle_quad_from_angles(ANGLES6), rows=5, cols=5))
        img_file = dump(tmp_path / "spiral.json", mesh_obj(spiral))
        an = str(tmp_path / "an.json")
        rc = main(["analyze", img_file, an, "--ref", lattice_mesh_file,
                   "--theta", "0", "--quiet"])
        assert rc == 0
        out = tmp_path / "sev.svg"
        assert main(["render", img_file, str(out), "--report", an, "--quiet"]) == 0
        svg = out.read_text()
        # a spiral is nowhere conformally close to the flat lattice
        assert svg.count('stroke="#cf222e"') == 40
        assert svg.count('stroke="#1a7f37"') == 0

    def test_severity_colors_from_solve_report(self, tmp_path, lattice_mesh_file):
        targets = dump(tmp_path / "t.json", {"edges": [[1, 5]], "values": [0.05]})
        prefix = str(tmp_path / "s1")
        rc = main(["solve", lattice_mesh_file, targets, "--theta", str(math.pi / 3),
                   "--out-prefix", prefix, "--quiet"])
        assert rc == 0
        out = tmp_path / "sev.svg"
        rc = main(["render", prefix + ".mesh.json", str(out),
                   "--report", prefix + ".report.json", "--quiet"])
        assert rc == 0
        svg = out.read_text()
        # one edge carries the 0.05 deviation, the other 39 stay conformal
        assert svg.count('stroke="#cf222e"') == 1
        assert svg.count('stroke="#1a7f37"') == 39


class TestMiscellanea:
    def test_missing_input_file_exits_2(self, tmp_path):
        rc = main(["analyze", str(tmp_path / "absent.json"),
                   str(tmp_path / "an.json"), "--quiet"])
        assert rc == 2

    def test_bad_mesh_schema_exits_2(self, tmp_path):
        bad = dump(tmp_path / "m.json", {"vertices": [[0, 0], [1, 0]], "triangles": [[0, 1, 5]]})
        assert main(["analyze", bad, str(tmp_path / "an.json"), "--quiet"]) == 2
        bad = dump(tmp_path / "m2.json", {"vertices": [0.0, 1.0], "triangles": [[0, 1, 2]]})
        assert main(["analyze", bad, str(tmp_path / "an.json"), "--quiet"]) == 2

    def test_thread_cap_env(self, tmp_path, monkeypatch, lattice_mesh_file):
        monkeypatch.setenv("THETACONF_THREADS", "2")
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        assert main(["analyze", lattice_mesh_file, str(tmp_path / "an.json"), "--quiet"]) == 0
        assert os.environ["OMP_NUM_THREADS"] == "2"
        monkeypatch.setenv("THETACONF_THREADS", "zero")
        assert main(["analyze", lattice_mesh_file, str(tmp_path / "an2.json"), "--quiet"]) == 2

    def test_json_logs_emit_parseable_lines(self, tmp_path, lattice_mesh_file, capsys):
        rc = main(["analyze", lattice_mesh_file, str(tmp_path / "an.json"), "--json-logs"])
        assert rc == 0
        lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.strip()]
        assert lines
        for ln in lines:
            rec = json.loads(ln)
            assert set(rec) == {"level", "msg"}
