import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import (
    diagonal_square_mesh,
    flower_mesh,
    random_flower_mesh,
    regular_flower_mesh,
    square_pair_mesh,
)
from thetaconf import errors
from thetaconf.geom import (
    MoebiusMap,
    apply_moebius,
    build_mesh,
    corner_angles,
    flower,
    is_discrete_immersion,
)


def test_square_pair_tables():
    m = square_pair_mesh()
    assert m.n_vertices == 4
    assert m.n_triangles == 2
    assert m.n_edges == 5
    # The diagonal is the only interior edge.
    assert list(m.interior_edge_ids) == [m.edge_id(0, 2)]
    e = m.edge_id(0, 2)
    # Triangle (0,2,3) traverses the diagonal as 0 -> 2, triangle (0,1,2)
    # as 2 -> 0, so their apexes land on the left and right slots.
    assert m.edge_left[e] == 1 and m.edge_right[e] == 0
    assert m.edge_left_apex[e] == 3
    assert m.edge_right_apex[e] == 1


def test_edge_count_identity():
    # Every triangle contributes three edge slots: 2 * interior + boundary = 3 T.
    for m in (square_pair_mesh(), diagonal_square_mesh(), regular_flower_mesh(7)):
        assert 2 * m.interior_edge_ids.size + m.boundary_edge_ids.size == 3 * m.n_triangles
        assert m.euler_characteristic == 1
        assert m.is_disk()


def test_tri_edges_slots():
    m = square_pair_mesh()
    for t in range(m.n_triangles):
        for s in range(3):
            a = m.triangles[t, s]
            b = m.triangles[t, (s + 1) % 3]
            assert m.tri_edges[t, s] == m.edge_id(a, b)


def test_rejects_clockwise_triangle():
    with pytest.raises(errors.DegenerateTriangle):
        build_mesh([0.0, 1.0, 1.0j], [(0, 2, 1)])


def test_rejects_collinear_triangle():
    with pytest.raises(errors.DegenerateTriangle):
        build_mesh([0.0, 1.0, 2.0], [(0, 1, 2)])


def test_rejects_orientation_mismatch():
    # Both triangles traverse the edge 0 -> 1 in the same direction.
    with pytest.raises(errors.OrientationMismatch):
        build_mesh([0.0, 1.0, 1.0j, 2.0j], [(0, 1, 2), (0, 1, 3)])


def test_rejects_nonmanifold_edge():
    vertices = [0.0, 1.0, 1.0j, -1.0j, 0.5 + 0.5j]
    triangles = [(0, 1, 2), (0, 3, 1), (0, 1, 4)]
    with pytest.raises((errors.NonManifoldEdge, errors.OrientationMismatch)):
        build_mesh(vertices, triangles)


def test_rejects_bad_indices():
    with pytest.raises(errors.ValidationError):
        build_mesh([0.0, 1.0, 1.0j], [(0, 1, 3)])
    with pytest.raises(errors.ValidationError):
        build_mesh([0.0, 1.0, 1.0j], [(0, 1, 1)])


def test_corner_angles_sum():
    m = diagonal_square_mesh()
    ang = corner_angles(m)
    assert_allclose(ang.sum(axis=1), np.pi, atol=1e-14)
    assert_allclose(sorted(ang[0]), [np.pi / 4, np.pi / 4, np.pi / 2], atol=1e-14)


class TestFlower:
    def test_hex_ring_order(self):
        m = regular_flower_mesh(6)
        f = flower(m, 0)
        assert f.valence == 6
        assert f.ring == (1, 2, 3, 4, 5, 6)
        # Petal t spans ring[t], ring[t+1].
        for t, tri in enumerate(f.triangles):
            a, b, c = m.triangles[tri]
            assert a == 0
            assert (b, c) == (f.ring[t], f.ring[(t + 1) % 6])

    def test_relabeling_preserves_cycle(self):
        # The ring must be the same cyclic sequence no matter how the
        # triangle list is permuted or rolled.
        m = regular_flower_mesh(5)
        base = flower(m, 0).ring
        rng = np.random.default_rng(7)
        for _ in range(10):
            perm = rng.permutation(m.n_triangles)
            tris = m.triangles[perm]
            roll = rng.integers(0, 3)
            tris = np.roll(tris, roll, axis=1)
            m2 = build_mesh(m.vertices, tris)
            ring = flower(m2, 0).ring
            k = ring.index(base[0])
            assert tuple(ring[(k + i) % len(ring)] for i in range(len(ring))) == base

    def test_boundary_vertex_raises(self):
        m = square_pair_mesh()
        for v in range(4):
            with pytest.raises(errors.BoundaryVertex):
                flower(m, v)

    def test_broken_fan(self):
        # Two closed fans sharing only their center vertex.
        a = np.exp(2j * np.pi * np.arange(3) / 3)
        b = 10.0 + 0.5 * np.exp(2j * np.pi * np.arange(3) / 3)
        vertices = np.concatenate([[0.0 + 0j], a, [10.0 + 0j], b])
        tri_a = [(0, 1 + t, 1 + (t + 1) % 3) for t in range(3)]
        tri_b = [(4, 5 + t, 5 + (t + 1) % 3) for t in range(3)]
        # Fan b re-centered on vertex 0 to create the defect.
        tri_b = [(0, x, y) for (_, x, y) in tri_b]
        vertices[5:8] = 2.0 * np.exp(2j * np.pi * (np.arange(3) + 0.5) / 3)
        m = build_mesh(vertices, tri_a + tri_b)
        with pytest.raises(errors.BrokenFan):
            flower(m, 0)


class TestImmersion:
    def test_regular_flowers_pass(self):
        for k in range(3, 9):
            rep = is_discrete_immersion(regular_flower_mesh(k))
            assert rep.ok and rep.n_flowers == 1

    def test_random_flowers_pass(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            m = random_flower_mesh(rng, int(rng.integers(3, 10)))
            rep = is_discrete_immersion(m)
            assert rep.ok, rep.failures

    def test_folded_petal_fails(self):
        m = regular_flower_mesh(6)
        pts = m.vertices.copy()
        # Fold one ring vertex back across its neighbor: a petal flips sign.
        pts[3] = 0.9 * pts[1]
        rep = is_discrete_immersion(m, pts)
        assert not rep.ok
        assert rep.failures[0].reason.startswith("petal")

    def test_double_winding_fails(self):
        # Seven positive petals of angle 4 pi / 7 wind twice around the
        # center: every petal is fine, only non-adjacent overlap shows it.
        ring = np.exp(4j * np.pi * np.arange(7) / 7)
        m = flower_mesh(ring)
        rep = is_discrete_immersion(m)
        assert not rep.ok
        assert "overlap" in rep.failures[0].reason

    def test_matches_polygon_union_oracle(self):
        shapely = pytest.importorskip("shapely")
        from shapely.geometry import Polygon
        from shapely.ops import unary_union

        def oracle(mesh, pts):
            f = flower(mesh, 0)
            petals = []
            for t in range(f.valence):
                zs = [pts[0], pts[f.ring[t]], pts[f.ring[(t + 1) % f.valence]]]
                poly = Polygon([(z.real, z.imag) for z in zs])
                if not poly.exterior.is_ccw or poly.area <= 0.0:
                    return False
                petals.append(poly)
            scale = max(abs(pts[r] - pts[0]) for r in f.ring)
            total = sum(p.area for p in petals)
            return abs(unary_union(petals).area - total) <= 1e-9 * scale * scale

        rng = np.random.default_rng(11)
        n_disagree = 0
        for trial in range(60):
            m = random_flower_mesh(rng, int(rng.integers(3, 9)))
            pts = m.vertices.copy()
            if trial % 2:
                # Shove one ring vertex somewhere arbitrary; the star may
                # or may not stay embedded.
                k = int(rng.integers(1, m.n_vertices))
                pts[k] = pts[0] + rng.normal(scale=1.2) + 1j * rng.normal(scale=1.2)
            ours = is_discrete_immersion(m, pts).ok
            ref = oracle(m, pts)
            n_disagree += ours != ref
        assert n_disagree == 0


class TestMoebius:
    def test_singular_rejected(self):
        with pytest.raises(errors.ValidationError):
            MoebiusMap(1, 2, 2, 4)

    def test_from_three_points(self):
        src = (0.0, 1.0, 2.0j)
        dst = (1.0 + 1j, 3.0, -2.0j)
        mo = MoebiusMap.from_three_points(src, dst)
        assert_allclose(mo.apply(np.array(src)), np.array(dst), atol=1e-12)

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(5)
        mo = MoebiusMap(1.0 + 0.5j, -2.0, 0.25j, 1.5)
        z = rng.normal(size=20) + 1j * rng.normal(size=20)
        back = mo.inverse().apply(mo.apply(z))
        assert_allclose(back, z, atol=1e-12)

    def test_pole_raises(self):
        mo = MoebiusMap(1.0, 0.0, 1.0, -2.0)
        with pytest.raises(errors.PointAtInfinity):
            mo.apply(2.0)

    def test_apply_moebius_on_mesh(self):
        m = square_pair_mesh()
        mo = MoebiusMap(2.0, 1.0j, 0.01, 1.0)
        out = apply_moebius(m.vertices, mo)
        assert out.shape == m.vertices.shape
        again = build_mesh(out, m.triangles)
        assert again.n_edges == m.n_edges
