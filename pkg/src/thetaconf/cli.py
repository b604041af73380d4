"""Command-line surface: generators, analysis, solving, and SVG rendering.

Four subcommands cover the workflow end to end: ``gen`` emits mesh JSON
from generator parameters, ``analyze`` reports cross-ratio data and
consistency checks, ``solve`` runs the variational solver and lays out
the image, ``render`` draws a mesh deterministically as SVG. All file
formats are JSON except the SVG output; identical inputs and flags give
byte-identical outputs.

Exit codes: 0 success, 2 validation failure (bad JSON, schema, or
parameters), 3 infeasible problem data, 4 solver not converged.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import errors
from .confsym import (
    ConfSymParams,
    DoyleSpec,
    LatticeSpec,
    confsym_field,
    doyle_quad_from_angles,
    gen_doyle,
    gen_lattice,
    grow_from_q,
)
from .crossratio import CrossRatioField, check_flower_closing, theta_residual
from .confsym import check_conf_symmetric_flower
from .geom import TriMesh, build_mesh, flower, is_discrete_immersion
from .layout import flower_target_sums, reconstruct
from .trisolve import TriangleFrame
from .varprin import OmegaField, maximize

LOG = logging.getLogger("thetaconf.cli")

DEFAULT_THETAS = (0.0, np.pi / 6, np.pi / 4, np.pi / 3, np.pi / 2)

FACE_FILL = "#dbe4f0"
EDGE_COLOR = "#1f2833"
CIRCLE_COLOR = "#5468c4"
VERTEX_COLOR = "#1f2833"


@dataclass(frozen=True)
class RenderStyle:
    """Deterministic drawing parameters, all relative to the mesh diameter."""

    stroke_width: float = 0.004
    vertex_radius: float = 0.0
    circumcircles: bool = False
    margin: float = 0.05
    severity_colors: tuple = ("#1a7f37", "#b08800", "#cf222e")
    severity_thresholds: tuple = (1e-9, 1e-6)


# -- small utilities ---------------------------------------------------------


def _apply_thread_cap():
    """Propagate THETACONF_THREADS to the usual pool size variables.

    Caps pools created from here on and in child processes; pools a
    library already started keep their size.
    """
    raw = os.environ.get("THETACONF_THREADS")
    if raw is None:
        return None
    try:
        cap = int(raw)
    except ValueError as exc:
        raise errors.ValidationError("THETACONF_THREADS must be an integer") from exc
    if cap < 1:
        raise errors.ValidationError("THETACONF_THREADS must be at least 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(cap)
    return cap


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {"level": record.levelname.lower(), "msg": record.getMessage()}, sort_keys=True
        )


def _configure_logging(quiet: bool, json_logs: bool):
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
    LOG.handlers.clear()
    LOG.addHandler(handler)
    LOG.setLevel(logging.WARNING if quiet else logging.INFO)
    LOG.propagate = False


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise errors.ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise errors.ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, complex):
        return [float(x.real), float(x.imag)]
    return x


def write_json(path: str, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _as_complex(raw, what: str) -> complex:
    if isinstance(raw, bool):
        raise errors.ValidationError(f"{what} must be a number or an [re, im] pair")
    if isinstance(raw, (int, float)):
        return complex(raw)
    if (
        isinstance(raw, (list, tuple))
        and len(raw) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
    ):
        return complex(raw[0], raw[1])
    raise errors.ValidationError(f"{what} must be a number or an [re, im] pair")


def _need(params: dict, key: str, path: str):
    if key not in params:
        raise errors.ValidationError(f"{path}: missing required key '{key}'")
    return params[key]


def _as_int(raw, what: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or int(raw) != raw:
        raise errors.ValidationError(f"{what} must be an integer")
    return int(raw)


def load_mesh(path: str) -> TriMesh:
    """Read and validate a mesh JSON file."""
    data = _load_json(path)
    if not isinstance(data, dict):
        raise errors.ValidationError(f"{path}: mesh file must hold a JSON object")
    for key in ("vertices", "triangles"):
        if key not in data:
            raise errors.ValidationError(f"{path}: mesh object is missing '{key}'")
    raw_v = data["vertices"]
    if not isinstance(raw_v, list) or not raw_v:
        raise errors.ValidationError(f"{path}: 'vertices' must be a non-empty list")
    verts = np.array([_as_complex(v, f"{path}: vertex") for v in raw_v])
    raw_t = data["triangles"]
    if not isinstance(raw_t, list) or not raw_t:
        raise errors.ValidationError(f"{path}: 'triangles' must be a non-empty list")
    tris = []
    for row in raw_t:
        if not isinstance(row, list) or len(row) != 3:
            raise errors.ValidationError(f"{path}: each triangle must be a list of three indices")
        tris.append([_as_int(v, f"{path}: triangle index") for v in row])
    return build_mesh(verts, np.asarray(tris))


def mesh_to_obj(vertices, triangles, extra=None) -> dict:
    obj = {
        "vertices": [[float(z.real), float(z.imag)] for z in np.asarray(vertices, dtype=complex)],
        "triangles": [[int(v) for v in row] for row in np.asarray(triangles)],
    }
    if extra:
        obj.update(extra)
    return obj


# -- gen ----------------------------------------------------------------------


def _growth_obj(growth) -> dict:
    return {
        "ok": bool(growth.ok),
        "n_placed": int(growth.n_placed),
        "seed_vertex": int(growth.seed_vertex),
        "failures": [
            {"kind": f.kind, "vertex": int(f.vertex), "edge": int(f.edge), "detail": f.detail}
            for f in growth.failures
        ],
    }


def cmd_gen(args) -> int:
    params = _load_json(args.params)
    if not isinstance(params, dict):
        raise errors.ValidationError(f"{args.params}: parameter file must hold a JSON object")

    if args.kind == "lattice":
        spec = LatticeSpec(
            alpha=float(_need(params, "alpha", args.params)),
            beta=float(_need(params, "beta", args.params)),
            rows=_as_int(_need(params, "rows", args.params), "rows"),
            cols=_as_int(_need(params, "cols", args.params), "cols"),
        )
        mesh = gen_lattice(spec)
        obj = mesh_to_obj(mesh.vertices, mesh.triangles)

    elif args.kind == "doyle":
        rows = _as_int(_need(params, "rows", args.params), "rows")
        cols = _as_int(_need(params, "cols", args.params), "cols")
        if "quad" in params:
            raw = params["quad"]
            if not isinstance(raw, list) or len(raw) != 4:
                raise errors.ValidationError(f"{args.params}: 'quad' must list four corner points")
            quad = tuple(_as_complex(v, f"{args.params}: quad corner") for v in raw)
        elif "angles" in params:
            raw = params["angles"]
            if not isinstance(raw, list) or len(raw) != 6:
                raise errors.ValidationError(f"{args.params}: 'angles' must list six angles")
            quad = doyle_quad_from_angles(
                tuple(float(v) for v in raw), scale=float(params.get("scale", 1.0))
            )
        else:
            raise errors.ValidationError(f"{args.params}: doyle needs either 'quad' or 'angles'")
        mesh = gen_doyle(DoyleSpec(quad=quad, rows=rows, cols=cols))
        obj = mesh_to_obj(mesh.vertices, mesh.triangles)

    else:  # confsym
        p = ConfSymParams(
            a=_as_complex(_need(params, "a", args.params), "a"),
            b=_as_complex(_need(params, "b", args.params), "b"),
            c=_as_complex(_need(params, "c", args.params), "c"),
            rows=_as_int(_need(params, "rows", args.params), "rows"),
            cols=_as_int(_need(params, "cols", args.params), "cols"),
        )
        field = confsym_field(p)
        growth = grow_from_q(field)
        report = _growth_obj(growth)
        if growth.ok:
            mesh = growth.mesh(field.mesh)
            obj = mesh_to_obj(mesh.vertices, mesh.triangles, extra={"growth": report})
        else:
            base = field.mesh
            idx = np.flatnonzero(growth.placed)
            remap = np.full(base.n_vertices, -1, dtype=int)
            remap[idx] = np.arange(idx.size)
            keep = np.all(growth.placed[base.triangles], axis=1)
            sub_tris = remap[base.triangles[keep]]
            obj = mesh_to_obj(growth.positions[idx], sub_tris, extra={"growth": report})
            LOG.warning(
                "growth degenerated after %d of %d vertices; wrote a partial mesh",
                growth.n_placed,
                base.n_vertices,
            )

    write_json(args.out, obj)
    LOG.info("wrote %s", args.out)
    return 0


# -- analyze -------------------------------------------------------------------


def _flower_closing_report(mesh: TriMesh, field: CrossRatioField) -> list:
    out = []
    for v in mesh.interior_vertex_ids:
        fl = flower(mesh, int(v))
        spokes = np.array([mesh.edge_id(int(v), int(r)) for r in fl.ring])
        rep = check_flower_closing(np.exp(field.logs[spokes]))
        out.append(
            {
                "vertex": int(v),
                "valence": rep.valence,
                "holonomy_defect": rep.holonomy_defect,
                "closure_defect": rep.closure_defect,
                "ok": rep.ok,
            }
        )
    return out


def _conf_symmetry_report(mesh: TriMesh) -> list:
    out = []
    for v in mesh.interior_vertex_ids:
        fl = flower(mesh, int(v))
        if fl.valence != 6:
            continue
        pts = np.concatenate([[mesh.vertices[fl.center]], mesh.vertices[np.asarray(fl.ring)]])
        rep = check_conf_symmetric_flower(pts)
        out.append(
            {
                "vertex": int(v),
                "symmetric": rep.symmetric,
                "max_opposite_dev": rep.max_opposite_dev,
                "ok": rep.ok,
            }
        )
    return out


def cmd_analyze(args) -> int:
    mesh = load_mesh(args.mesh)
    field = CrossRatioField.from_positions(mesh)
    ids = mesh.interior_edge_ids
    immersion = is_discrete_immersion(mesh)
    report = {
        "mesh": {
            "n_vertices": mesh.n_vertices,
            "n_triangles": mesh.n_triangles,
            "n_edges": mesh.n_edges,
            "n_interior_edges": int(ids.size),
        },
        "cross_ratios": [
            {
                "edge": [int(mesh.edges[e, 0]), int(mesh.edges[e, 1])],
                "log": [float(field.logs[e].real), float(field.logs[e].imag)],
                "value": [float(np.exp(field.logs[e]).real), float(np.exp(field.logs[e]).imag)],
            }
            for e in ids
        ],
        "flower_closing": _flower_closing_report(mesh, field),
        "conformal_symmetry": _conf_symmetry_report(mesh),
        "immersion": {
            "ok": immersion.ok,
            "failures": [{"vertex": f.vertex, "reason": f.reason} for f in immersion.failures],
        },
    }

    if args.ref is not None:
        ref = load_mesh(args.ref)
        if ref.n_vertices != mesh.n_vertices or not np.array_equal(ref.triangles, mesh.triangles):
            raise errors.CombinatoricsMismatch(
                "reference mesh must share the vertex count and triangle list"
            )
        ref_logs = CrossRatioField.from_positions(mesh, ref.vertices).logs
        thetas = args.theta if args.theta else list(DEFAULT_THETAS)
        rows = []
        for th in thetas:
            res = np.asarray(theta_residual(field.logs[ids], ref_logs[ids], float(th)))
            rows.append(
                {
                    "theta": float(th),
                    "max": float(np.max(np.abs(res))) if res.size else 0.0,
                    "per_edge": res,
                }
            )
        report["theta_residuals"] = rows

    write_json(args.out, report)
    LOG.info("wrote %s", args.out)
    return 0


# -- solve ---------------------------------------------------------------------


def _load_targets(path: str, mesh: TriMesh) -> np.ndarray:
    data = _load_json(path)
    ids = mesh.interior_edge_ids
    n = int(ids.size)
    if data is None:
        return np.zeros(n)
    if isinstance(data, dict) and "targets" in data:
        data = data["targets"]
    if isinstance(data, list):
        arr = np.asarray(data, dtype=float)
        if arr.shape != (n,):
            raise errors.ValidationError(
                f"{path}: need one target per interior edge ({n}), got {arr.size}"
            )
    elif isinstance(data, dict) and "edges" in data and "values" in data:
        arr = np.zeros(n)
        pairs = data["edges"]
        vals = data["values"]
        if not isinstance(pairs, list) or not isinstance(vals, list) or len(pairs) != len(vals):
            raise errors.ValidationError(f"{path}: 'edges' and 'values' must be equal-length lists")
        for pair, val in zip(pairs, vals):
            if not isinstance(pair, list) or len(pair) != 2:
                raise errors.ValidationError(f"{path}: each edge must be an [i, j] pair")
            e = mesh.edge_id(_as_int(pair[0], "edge endpoint"), _as_int(pair[1], "edge endpoint"))
            if not mesh.interior_mask[e]:
                raise errors.ValidationError(f"{path}: edge {pair} is a boundary edge")
            arr[int(np.searchsorted(ids, e))] = float(val)
    else:
        raise errors.ValidationError(
            f"{path}: targets must be null, a list, or an object with 'targets' or 'edges'+'values'"
        )
    if not np.all(np.isfinite(arr)):
        raise errors.ValidationError(f"{path}: targets must be finite")
    return arr


def _load_fixed_omega(path: str, mesh: TriMesh):
    """Edges whose omega is prescribed rather than solved for."""
    data = _load_json(path)
    if not (isinstance(data, dict) and "edges" in data and "values" in data):
        raise errors.ValidationError(f"{path}: fixed-omega file needs 'edges' and 'values'")
    pairs, vals = data["edges"], data["values"]
    if not isinstance(pairs, list) or not isinstance(vals, list) or len(pairs) != len(vals):
        raise errors.ValidationError(f"{path}: 'edges' and 'values' must be equal-length lists")
    mask = np.zeros(mesh.n_edges, dtype=bool)
    value = np.zeros(mesh.n_edges)
    for pair, val in zip(pairs, vals):
        if not isinstance(pair, list) or len(pair) != 2:
            raise errors.ValidationError(f"{path}: each edge must be an [i, j] pair")
        e = mesh.edge_id(_as_int(pair[0], "edge endpoint"), _as_int(pair[1], "edge endpoint"))
        mask[e] = True
        value[e] = float(val)
    if not np.all(np.isfinite(value)):
        raise errors.ValidationError(f"{path}: fixed omega values must be finite")
    return mask, value


def _solver_report_obj(report) -> dict:
    return {
        "converged": bool(report.converged),
        "iterations": int(report.iterations),
        "final_max_residual": float(report.final_max_residual),
        "gradient_norm_history": [float(v) for v in report.gradient_norm_history],
        "failures": _jsonable(list(report.failures)),
    }


def cmd_solve(args) -> int:
    mesh = load_mesh(args.mesh)
    targets = _load_targets(args.targets, mesh)
    frames = TriangleFrame.from_mesh(mesh)
    field = OmegaField.zeros(mesh, targets=targets, fix_boundary=args.fix_boundary)
    value = field.value.copy()
    fixed = field.fixed.copy()
    if args.init_omega is not None:
        mask, init_value = _load_fixed_omega(args.init_omega, mesh)
        value[mask] = init_value[mask]
    if args.fixed_omega is not None:
        mask, fixed_value = _load_fixed_omega(args.fixed_omega, mesh)
        value[mask] = fixed_value[mask]
        fixed |= mask
    field = OmegaField(mesh=mesh, value=value, fixed=fixed, target=field.target)
    theta = float(args.theta)

    sums = flower_target_sums(mesh, targets)
    if sums.size and np.max(np.abs(sums)) > 1e-9:
        LOG.warning(
            "targets sum to %.3e around a flower; no seamless image exists and the "
            "layout will report gluing mismatches",
            float(np.max(np.abs(sums))),
        )

    try:
        out_field, report = maximize(
            mesh, frames, field, theta, tol=args.tol, max_iter=args.max_iter, pin=args.pin
        )
    except errors.NotConverged as exc:
        if exc.report is not None:
            write_json(f"{args.out_prefix}.report.json", {"solver": _solver_report_obj(exc.report)})
            LOG.info("wrote %s.report.json", args.out_prefix)
        LOG.error("solver did not converge: %s", exc)
        return 4

    lay = reconstruct(mesh, frames, out_field, theta)
    residual_vs_targets = (
        float(np.max(np.abs(lay.per_edge_theta_residuals - targets)))
        if targets.size
        else 0.0
    )

    write_json(
        f"{args.out_prefix}.omega.json",
        {
            "theta": theta,
            "edges": [[int(i), int(j)] for i, j in mesh.edges],
            "omega": [float(v) for v in out_field.value],
        },
    )
    write_json(
        f"{args.out_prefix}.report.json",
        {
            "theta": theta,
            "solver": _solver_report_obj(report),
            "layout": {
                "max_gluing_mismatch": lay.max_mismatch,
                "max_theta_residual_vs_targets": residual_vs_targets,
                "max_flower_defect": float(np.max(lay.flower_consistency_defects))
                if lay.flower_consistency_defects.size
                else 0.0,
                "all_flowers_embedded": lay.all_embedded,
                "per_edge_theta_residuals": lay.per_edge_theta_residuals,
            },
        },
    )
    write_json(
        f"{args.out_prefix}.mesh.json", mesh_to_obj(lay.positions, mesh.triangles)
    )
    LOG.info(
        "converged in %d steps; wrote %s.{omega,report,mesh}.json",
        report.iterations,
        args.out_prefix,
    )
    return 0


# -- render ----------------------------------------------------------------------


def _f(x) -> str:
    """Shortest round-trip decimal, stable across runs."""
    return repr(float(x))


def _circumcircle(a: complex, b: complex, c: complex):
    ex, fx = b - a, c - a
    d = 2.0 * (ex.real * fx.imag - ex.imag * fx.real)
    ux = (abs(ex) ** 2 * fx.imag - abs(fx) ** 2 * ex.imag) / d
    uy = (abs(fx) ** 2 * ex.real - abs(ex) ** 2 * fx.real) / d
    center = a + complex(ux, uy)
    return center, abs(center - a)


def _residuals_from_report(data, n: int, path: str) -> np.ndarray:
    if isinstance(data, dict):
        if "per_edge" in data:
            data = data["per_edge"]
        elif "layout" in data and isinstance(data["layout"], dict) and "per_edge_theta_residuals" in data["layout"]:
            data = data["layout"]["per_edge_theta_residuals"]
        elif "theta_residuals" in data and data["theta_residuals"]:
            data = data["theta_residuals"][0]["per_edge"]
        else:
            raise errors.ValidationError(f"{path}: no per-edge residual array found")
    arr = np.asarray(data, dtype=float)
    if arr.shape != (n,):
        raise errors.ValidationError(
            f"{path}: residual array must have one entry per interior edge ({n})"
        )
    return arr


def render_svg(mesh: TriMesh, style: RenderStyle, residuals=None) -> str:
    """Deterministic SVG drawing of a mesh, optionally residual-colored."""
    pts = mesh.vertices
    xs, ys = pts.real, -pts.imag  # SVG's y axis points down
    x0, y0 = float(xs.min()), float(ys.min())
    w = float(xs.max()) - x0
    h = float(ys.max()) - y0
    diam = max(w, h) or 1.0
    pad = style.margin * diam
    sw = style.stroke_width * diam

    res_by_edge = None
    if residuals is not None:
        res_by_edge = np.full(mesh.n_edges, np.nan)
        res_by_edge[mesh.interior_edge_ids] = np.abs(np.asarray(residuals, dtype=float))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="'
        f'{_f(x0 - pad)} {_f(y0 - pad)} {_f(w + 2 * pad)} {_f(h + 2 * pad)}">',
        f'<g fill="{FACE_FILL}" stroke="none">',
    ]
    for t in range(mesh.n_triangles):
        corner = " ".join(
            f"{_f(xs[v])},{_f(ys[v])}" for v in mesh.triangles[t]
        )
        out.append(f'<polygon points="{corner}"/>')
    out.append("</g>")

    out.append(
        f'<g stroke="{EDGE_COLOR}" stroke-width="{_f(sw)}" stroke-linecap="round" fill="none">'
    )
    lo, hi = style.severity_thresholds
    ok_c, warn_c, bad_c = style.severity_colors
    for e in range(mesh.n_edges):
        i, j = mesh.edges[e]
        attr = ""
        if res_by_edge is not None and np.isfinite(res_by_edge[e]):
            r = res_by_edge[e]
            color = ok_c if r <= lo else (warn_c if r <= hi else bad_c)
            attr = f' stroke="{color}"'
        out.append(
            f'<line x1="{_f(xs[i])}" y1="{_f(ys[i])}" x2="{_f(xs[j])}" y2="{_f(ys[j])}"{attr}/>'
        )
    out.append("</g>")

    if style.circumcircles:
        out.append(
            f'<g fill="none" stroke="{CIRCLE_COLOR}" stroke-width="{_f(0.6 * sw)}" '
            f'stroke-dasharray="{_f(2.5 * sw)} {_f(2.5 * sw)}">'
        )
        for t in range(mesh.n_triangles):
            a, b, c = (complex(pts[v]) for v in mesh.triangles[t])
            center, radius = _circumcircle(a, b, c)
            out.append(
                f'<circle class="circumcircle" cx="{_f(center.real)}" cy="{_f(-center.imag)}" '
                f'r="{_f(radius)}"/>'
            )
        out.append("</g>")

    if style.vertex_radius > 0.0:
        out.append(f'<g fill="{VERTEX_COLOR}" stroke="none">')
        rad = style.vertex_radius * diam
        for v in range(mesh.n_vertices):
            out.append(
                f'<circle class="vertex" cx="{_f(xs[v])}" cy="{_f(ys[v])}" r="{_f(rad)}"/>'
            )
        out.append("</g>")

    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_render(args) -> int:
    mesh = load_mesh(args.mesh)
    residuals = None
    if args.report is not None:
        residuals = _residuals_from_report(
            _load_json(args.report), int(mesh.interior_edge_ids.size), args.report
        )
    style = RenderStyle(
        stroke_width=args.stroke_width,
        vertex_radius=args.vertex_radius,
        circumcircles=args.circumcircles,
        margin=args.margin,
    )
    svg = render_svg(mesh, style, residuals)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    LOG.info("wrote %s", args.out)
    return 0


# -- parser / entry ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress informational logs")
    common.add_argument("--json-logs", action="store_true", help="log one JSON object per line")

    parser = argparse.ArgumentParser(
        prog="thetaconf",
        description="Discrete maps between planar triangulations with rotated-log "
        "cross-ratio constraints: generate, analyze, solve, render.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a mesh JSON from parameters")
    p.add_argument("kind", choices=("lattice", "doyle", "confsym"))
    p.add_argument("params", help="parameter JSON file")
    p.add_argument("out", help="output mesh JSON file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", parents=[common], help="report cross-ratio and closing data")
    p.add_argument("mesh", help="mesh JSON file")
    p.add_argument("out", help="output report JSON file")
    p.add_argument("--ref", help="reference mesh JSON with the same combinatorics")
    p.add_argument(
        "--theta",
        type=float,
        action="append",
        help="rotation angle for residuals (repeatable; default samples several)",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", parents=[common], help="solve for omega, lay out, verify")
    p.add_argument("mesh", help="mesh JSON file")
    p.add_argument("targets", help="targets JSON file (null for zero targets)")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--pin", default="auto", help="gauge pin: auto, mean, none, or edge:<id>")
    p.add_argument(
        "--fix-boundary",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="hold boundary-edge omega at zero",
    )
    p.add_argument(
        "--fixed-omega",
        help="JSON file with 'edges' and 'values' prescribing omega on those edges",
    )
    p.add_argument(
        "--init-omega",
        help="JSON file with 'edges' and 'values' giving a warm start "
        "(values stay free; needed when zero omega is outside the feasible set)",
    )
    p.add_argument("--out-prefix", default="thetaconf_solve")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("render", parents=[common], help="draw a mesh as deterministic SVG")
    p.add_argument("mesh", help="mesh JSON file")
    p.add_argument("out", help="output SVG file")
    p.add_argument("--circumcircles", action="store_true", help="dotted circumcircles per triangle")
    p.add_argument("--stroke-width", type=float, default=RenderStyle.stroke_width)
    p.add_argument("--vertex-radius", type=float, default=RenderStyle.vertex_radius)
    p.add_argument("--margin", type=float, default=RenderStyle.margin)
    p.add_argument("--report", help="report JSON with per-edge residuals for severity coloring")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet, args.json_logs)
    try:
        _apply_thread_cap()
        return args.func(args)
    except errors.NotConverged as exc:
        LOG.error("not converged: %s", exc)
        return 4
    except (errors.Infeasible, errors.DegenerateImage, errors.InfeasibleStep, errors.NearDegenerate) as exc:
        LOG.error("infeasible: %s", exc)
        return 3
    except errors.ThetaconfError as exc:
        LOG.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
