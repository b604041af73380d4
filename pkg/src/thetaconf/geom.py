"""Oriented triangle meshes, vertex stars, and planar immersion checks.

A mesh is a triangle soup over complex vertex positions. Every triangle is a
counterclockwise index triple into the vertex array. Building a TriMesh
derives the edge tables used by the rest of the package (edge ids, incident
triangles per edge, interior flags, vertex stars) and rejects soups that are
not oriented manifold surfaces with positive triangles.

Positions live in the complex plane throughout. Functions that analyze a
geometry other than the stored one accept a ``positions`` override, so one
combinatorial mesh can carry several immersions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryVertex,
    BrokenFan,
    DegenerateTriangle,
    NonManifoldEdge,
    OrientationMismatch,
    PointAtInfinity,
    ValidationError,
)

# Twice-area of a triangle must exceed AREA_EPS times its squared diameter.
AREA_EPS = 1e-12
# Relative length tolerance for contact decisions in the immersion test.
GEOM_EPS = 1e-12


def _cross(u: np.ndarray | complex, w: np.ndarray | complex):
    """Scalar cross product of complex numbers viewed as plane vectors."""
    return (np.conj(u) * w).imag


@dataclass(frozen=True)
class Flower:
    """Closed star of an interior vertex.

    ``ring`` lists the neighbor vertices in counterclockwise order starting
    from the smallest vertex index; ``triangles`` lists the petal triangle
    ids so that petal k is (center, ring[k], ring[k+1 mod valence]).
    """

    center: int
    ring: tuple[int, ...]
    triangles: tuple[int, ...]

    @property
    def valence(self) -> int:
        return len(self.ring)


@dataclass(frozen=True)
class FlowerFailure:
    vertex: int
    reason: str


@dataclass(frozen=True)
class ImmersionReport:
    ok: bool
    n_flowers: int
    failures: tuple[FlowerFailure, ...]


class TriMesh:
    """Oriented manifold triangle mesh with derived edge tables.

    Attributes
    ----------
    vertices : (V,) complex array of reference positions.
    triangles : (T,3) int array, each row counterclockwise.
    edges : (E,2) int array; each row is sorted (i < j) and rows are in
        lexicographic order, which fixes the edge ids deterministically.
    tri_edges : (T,3) int array; entry (t,s) is the edge id of the directed
        edge from corner s to corner s+1 of triangle t.
    edge_left, edge_right : (E,) triangle ids. For edge (i,j) with i < j the
        left triangle traverses it as i->j, the right one as j->i; -1 when
        there is no such triangle.
    edge_left_apex, edge_right_apex : (E,) vertex ids opposite the edge in
        the left and right triangle, -1 when absent.
    """

    def __init__(self, vertices, triangles):
        vertices = np.asarray(vertices, dtype=complex)
        triangles = np.asarray(triangles)
        if vertices.ndim != 1 or vertices.size == 0:
            raise ValidationError("vertices must be a non-empty 1-d complex array")
        if not np.all(np.isfinite(vertices)):
            raise ValidationError("vertex positions must be finite")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
            raise ValidationError("triangles must be a non-empty (T,3) index array")
        if not np.issubdtype(triangles.dtype, np.integer):
            tri_f = np.asarray(triangles, dtype=float)
            triangles = tri_f.astype(int)
            if np.any(tri_f != triangles):
                raise ValidationError("triangle indices must be integers")
        if triangles.min() < 0 or triangles.max() >= vertices.size:
            raise ValidationError("triangle index out of range")
        if np.any(
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 2] == triangles[:, 0])
        ):
            raise ValidationError("triangle with a repeated vertex")

        self.vertices = vertices
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)

        self._check_orientation()
        self._build_edge_tables()
        self._build_vertex_stars()

    # -- construction ------------------------------------------------------

    def _check_orientation(self):
        z = self.vertices[self.triangles]
        area2 = _cross(z[:, 1] - z[:, 0], z[:, 2] - z[:, 0])
        d2 = np.max(np.abs(z - np.roll(z, 1, axis=1)) ** 2, axis=1)
        bad = area2 <= AREA_EPS * d2
        if np.any(bad):
            t = int(np.argmax(bad))
            raise DegenerateTriangle(
                f"triangle {t} is degenerate or clockwise (twice-area {area2[t]:.3e})"
            )

    def _build_edge_tables(self):
        tri = self.triangles
        T = tri.shape[0]
        heads = tri
        tails = np.roll(tri, -1, axis=1)
        lo = np.minimum(heads, tails).ravel()
        hi = np.maximum(heads, tails).ravel()
        forward = (heads < tails).ravel()  # directed edge equals sorted order

        keys = np.stack([lo, hi], axis=1)
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            e = int(np.argmax(counts > 2))
            raise NonManifoldEdge(f"edge {tuple(uniq[e])} lies in {counts[e]} triangles")

        E = uniq.shape[0]
        edge_left = np.full(E, -1, dtype=np.int64)
        edge_right = np.full(E, -1, dtype=np.int64)
        left_apex = np.full(E, -1, dtype=np.int64)
        right_apex = np.full(E, -1, dtype=np.int64)
        tri_ids = np.repeat(np.arange(T), 3)
        apexes = np.roll(tri, -2, axis=1).ravel()

        for occ in range(3 * T):
            e = inv[occ]
            if forward[occ]:
                if edge_left[e] >= 0:
                    raise OrientationMismatch(
                        f"edge {tuple(uniq[e])} traversed twice in the same direction"
                    )
                edge_left[e] = tri_ids[occ]
                left_apex[e] = apexes[occ]
            else:
                if edge_right[e] >= 0:
                    raise OrientationMismatch(
                        f"edge {tuple(uniq[e])} traversed twice in the same direction"
                    )
                edge_right[e] = tri_ids[occ]
                right_apex[e] = apexes[occ]

        self.edges = uniq.astype(np.int64)
        self.tri_edges = inv.reshape(T, 3).astype(np.int64)
        self.edge_left = edge_left
        self.edge_right = edge_right
        self.edge_left_apex = left_apex
        self.edge_right_apex = right_apex
        self.interior_mask = (edge_left >= 0) & (edge_right >= 0)
        self.interior_edge_ids = np.flatnonzero(self.interior_mask)
        self.boundary_edge_ids = np.flatnonzero(~self.interior_mask)

    def _build_vertex_stars(self):
        stars: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for t, (a, b, c) in enumerate(self.triangles):
            stars[a].append(t)
            stars[b].append(t)
            stars[c].append(t)
        self.vertex_triangles = tuple(tuple(s) for s in stars)
        bnd = np.zeros(self.n_vertices, dtype=bool)
        for e in self.boundary_edge_ids:
            bnd[self.edges[e, 0]] = True
            bnd[self.edges[e, 1]] = True
        self.boundary_vertex_mask = bnd
        self.interior_vertex_ids = np.flatnonzero(~bnd & (np.array([len(s) for s in stars]) > 0))

    # -- basic queries -----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.size

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    def edge_id(self, i: int, j: int) -> int:
        """Edge id of the undirected edge {i, j}."""
        lo, hi = (i, j) if i < j else (j, i)
        k = np.searchsorted(self.edges[:, 0], lo)
        while k < self.n_edges and self.edges[k, 0] == lo:
            if self.edges[k, 1] == hi:
                return int(k)
            k += 1
        raise ValidationError(f"no edge {{{i}, {j}}} in mesh")

    def is_connected(self) -> bool:
        seen = np.zeros(self.n_vertices, dtype=bool)
        stack = [int(self.triangles[0, 0])]
        seen[stack[0]] = True
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges:
            adj[a].append(int(b))
            adj[b].append(int(a))
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        return bool(np.all(seen[used]))

    def is_disk(self) -> bool:
        """True for a connected triangulated disk (one boundary loop)."""
        return (
            self.is_connected()
            and self.boundary_edge_ids.size > 0
            and self.euler_characteristic == 1
        )

    def positions_or(self, positions) -> np.ndarray:
        if positions is None:
            return self.vertices
        positions = np.asarray(positions, dtype=complex)
        if positions.shape != self.vertices.shape:
            raise ValidationError("positions must match the vertex array shape")
        return positions


def build_mesh(vertices, triangles) -> TriMesh:
    """Validate a triangle soup and return its TriMesh."""
    return TriMesh(vertices, triangles)


def corner_angles(mesh: TriMesh, positions=None) -> np.ndarray:
    """Interior angles per triangle corner, shape (T,3), corner s at vertex s."""
    z = mesh.positions_or(positions)[mesh.triangles]
    out = np.empty((mesh.n_triangles, 3))
    for s in range(3):
        u = z[:, (s + 1) % 3] - z[:, s]
        w = z[:, (s + 2) % 3] - z[:, s]
        out[:, s] = np.arctan2(_cross(u, w), (np.conj(u) * w).real)
    return out


# -- vertex stars ----------------------------------------------------------


def flower(mesh: TriMesh, v: int) -> Flower:
    """Closed counterclockwise fan around interior vertex v.

    Raises BoundaryVertex if the star is open (v lies on the boundary) and
    BrokenFan if the incident triangles do not form one closed cycle.
    """
    tris = mesh.vertex_triangles[v]
    if not tris:
        raise ValidationError(f"vertex {v} belongs to no triangle")
    succ: dict[int, tuple[int, int]] = {}
    for t in tris:
        a, b, c = mesh.triangles[t]
        if a == v:
            x, y = int(b), int(c)
        elif b == v:
            x, y = int(c), int(a)
        else:
            x, y = int(a), int(b)
        succ[x] = (y, t)
    targets = {y for y, _ in succ.values()}
    if targets != set(succ):
        raise BoundaryVertex(f"vertex {v} lies on the boundary")
    start = min(succ)
    ring = [start]
    petals = []
    x = start
    for _ in range(len(succ)):
        y, t = succ[x]
        petals.append(t)
        x = y
        if x == start:
            break
        ring.append(x)
    if x != start or len(ring) != len(succ):
        raise BrokenFan(f"triangles around vertex {v} form more than one fan")
    return Flower(center=v, ring=tuple(ring), triangles=tuple(petals))


# -- immersion test --------------------------------------------------------


def _point_in_triangle(p, t0, t1, t2, eps2) -> bool:
    """Closed containment in a counterclockwise triangle, eps2 an area slack."""
    return (
        _cross(t1 - t0, p - t0) >= -eps2
        and _cross(t2 - t1, p - t1) >= -eps2
        and _cross(t0 - t2, p - t2) >= -eps2
    )


def _segments_touch(a0, a1, b0, b1, eps) -> bool:
    """True if closed segments [a0,a1] and [b0,b1] share any point.

    Endpoint coincidences count as touching. eps is an absolute length
    tolerance.
    """
    da = a1 - a0
    db = b1 - b0
    la = abs(da)
    lb = abs(db)
    if la <= eps and lb <= eps:
        return abs(a0 - b0) <= 2.0 * eps
    # Endpoint-on-segment covers every improper contact.
    for p, q0, dq, lq in (
        (b0, a0, da, la),
        (b1, a0, da, la),
        (a0, b0, db, lb),
        (a1, b0, db, lb),
    ):
        if lq <= eps:
            continue
        off = p - q0
        if abs(_cross(dq, off)) <= eps * lq:
            s = (np.conj(dq) * off).real / (lq * lq)
            if -eps / lq <= s <= 1.0 + eps / lq:
                return True
    d1 = _cross(da, b0 - a0)
    d2 = _cross(da, b1 - a0)
    d3 = _cross(db, a0 - b0)
    d4 = _cross(db, a1 - b0)
    ta = eps * la
    tb = eps * lb
    return ((d1 > ta and d2 < -ta) or (d1 < -ta and d2 > ta)) and (
        (d3 > tb and d4 < -tb) or (d3 < -tb and d4 > tb)
    )


def _spokes_overlap(zv, a1, b1, eps) -> bool:
    """Contact beyond the center for two spokes [zv,a1], [zv,b1].

    Segments sharing the exact endpoint zv meet elsewhere only when they
    are collinear and point the same way.
    """
    da = a1 - zv
    db = b1 - zv
    la = abs(da)
    lb = abs(db)
    if la <= eps or lb <= eps:
        return True
    return abs(_cross(da, db)) <= eps * max(la, lb) and (np.conj(da) * db).real > 0.0


def star_embedding_failure(center, ring_positions, eps_rel: float = GEOM_EPS):
    """Reason string if the closed petals around a center fail to embed.

    ``ring_positions`` are the neighbor positions in counterclockwise order;
    petal k is the closed triangle (center, ring[k], ring[k+1]). Returns
    None when the star embeds.
    """
    zv = complex(center)
    zr = np.asarray(ring_positions, dtype=complex)
    k = zr.size
    spoke = np.abs(zr - zv)
    loc = float(np.max(spoke))
    if loc == 0.0 or not np.isfinite(loc):
        return "degenerate_spokes"
    eps = eps_rel * loc
    nxt = np.roll(zr, -1)
    area2 = _cross(zr - zv, nxt - zv)
    if np.any(area2 <= eps * eps):
        return "petal_not_positive"
    # Positive petals meet their cyclic neighbors exactly along the shared
    # spoke, so only non-adjacent pairs need the full contact test.
    for i in range(k):
        pi = (zv, zr[i], zr[(i + 1) % k])
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            pj = (zv, zr[j], zr[(j + 1) % k])
            if _petals_collide(pi, pj, zv, eps):
                return f"petal_overlap:{i},{j}"
    return None


def _petals_collide(p, q, zv, eps) -> bool:
    """Contact test for two closed petal triangles sharing only the center zv.

    p and q are corner triples (zv, outer1, outer2). Spoke pairs share zv by
    construction and get the collinear-overlap test; every other segment
    pair must stay apart entirely; finally neither petal may swallow the
    other's outer corners.
    """
    eps2 = eps * eps
    for pa in (p[1], p[2]):
        for qa in (q[1], q[2]):
            if _spokes_overlap(zv, pa, qa, eps):
                return True
    for a0, a1 in ((zv, p[1]), (zv, p[2])):
        if _segments_touch(a0, a1, q[1], q[2], eps):
            return True
    for b0, b1 in ((zv, q[1]), (zv, q[2])):
        if _segments_touch(p[1], p[2], b0, b1, eps):
            return True
    if _segments_touch(p[1], p[2], q[1], q[2], eps):
        return True
    for x in (p[1], p[2]):
        if abs(x - zv) > eps and _point_in_triangle(x, *q, eps2):
            return True
    for x in (q[1], q[2]):
        if abs(x - zv) > eps and _point_in_triangle(x, *p, eps2):
            return True
    return False


def is_discrete_immersion(mesh: TriMesh, positions=None, eps: float = GEOM_EPS) -> ImmersionReport:
    """Check that every interior vertex star embeds.

    Petals around each interior vertex are tested pairwise as closed
    triangles: adjacent petals may share exactly their common spoke edge,
    all other pairs may share exactly the center point. Contact tolerances
    scale with the local spoke length.
    """
    pts = mesh.positions_or(positions)
    failures = []
    n = 0
    for v in mesh.interior_vertex_ids:
        fl = flower(mesh, int(v))
        n += 1
        reason = star_embedding_failure(pts[fl.center], pts[np.asarray(fl.ring)], eps)
        if reason is not None:
            failures.append(FlowerFailure(fl.center, reason))
    return ImmersionReport(ok=not failures, n_flowers=n, failures=tuple(failures))


# -- Moebius transformations -----------------------------------------------


@dataclass(frozen=True)
class MoebiusMap:
    """z -> (a z + b) / (c z + d) with a d - b c != 0."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))
        if scale == 0.0 or abs(self.det) <= 1e-14 * scale * scale:
            raise ValidationError("Moebius coefficients are singular")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def normalized(self) -> "MoebiusMap":
        s = np.sqrt(complex(self.det))
        return MoebiusMap(self.a / s, self.b / s, self.c / s, self.d / s)

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """Map applying ``other`` first, then self."""
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def apply(self, z):
        z = np.asarray(z, dtype=complex)
        den = self.c * z + self.d
        scale = np.max(np.abs(z)) if z.size else 1.0
        limit = 1e-14 * max(abs(self.c) * max(scale, 1.0), abs(self.d), 1e-300)
        if np.any(np.abs(den) <= limit):
            raise PointAtInfinity("a point maps to infinity under this Moebius map")
        return (self.a * z + self.b) / den

    @classmethod
    def from_three_points(cls, src, dst) -> "MoebiusMap":
        """Unique map sending the three src points to the three dst points."""

        def to_zero_one_inf(p, q, r):
            # z -> (z - p)(q - r) / ((z - r)(q - p))
            return cls(q - r, -p * (q - r), q - p, -r * (q - p))

        m1 = to_zero_one_inf(*[complex(w) for w in src])
        m2 = to_zero_one_inf(*[complex(w) for w in dst])
        return m2.inverse().compose(m1)


def apply_moebius(positions, m: MoebiusMap) -> np.ndarray:
    """Image of an array of positions under a Moebius map."""
    return m.apply(np.asarray(positions, dtype=complex))
