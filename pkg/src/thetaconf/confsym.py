"""Triangulated grids, spiral meshes, and conformally symmetric edge data.

The combinatorics used throughout is the standard triangulated parallelogram
grid: vertices indexed by integer pairs (n, m), each unit cell split along
the (n+1, m) to (n, m+1) diagonal. Its edges fall into three classes, and a
number of natural structures assign one multiplicative value per class and
per transversal level:

* affine lattices: vertex (n, m) at n sin(alpha) + m sin(beta) e^{i gamma},
  every cell congruent, one constant cross ratio per class;
* spiral meshes: two commuting similarities applied to a seed quad, again
  one constant per class;
* conformally symmetric fields: values a (abc)^{m-1}, b (abc)^{n-1},
  c (abc)^{k-1} on the three classes, the closing conditions holding at
  every vertex by construction.

grow_from_q runs the construction the other way: given per-edge values on
the grid it rebuilds vertex positions outward from a seed flower, checking
consistency and embeddedness as it goes, and stops at the first defect.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .crossratio import CrossRatioField, cross_ratio, log_mod_2pi
from .errors import Infeasible, SumConstraintViolated, ValidationError
from .geom import TriMesh, build_mesh, flower, star_embedding_failure

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# Edge classes on the grid, by index offset of the sorted vertex pair.
CLASS_DIAGONAL = 1
CLASS_COLUMN = 2
CLASS_ROW = 3


# -- grid combinatorics ------------------------------------------------------


@dataclass(frozen=True)
class GridPatch:
    """Rows x cols patch of the triangulated grid, vertices (n, m).

    n runs over [n0, n0 + cols - 1], m over [m0, m0 + rows - 1]; the vertex
    array index is row-major: idx = (m - m0) * cols + (n - n0).
    """

    rows: int
    cols: int
    n0: int = 0
    m0: int = 0

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValidationError("grid needs at least two rows and columns")

    @property
    def n_vertices(self) -> int:
        return self.rows * self.cols

    def index(self, n: int, m: int) -> int:
        if not (self.n0 <= n < self.n0 + self.cols and self.m0 <= m < self.m0 + self.rows):
            raise ValidationError(f"grid coordinate ({n}, {m}) out of range")
        return (m - self.m0) * self.cols + (n - self.n0)

    def coords(self, idx: int) -> tuple[int, int]:
        m, n = divmod(int(idx), self.cols)
        return n + self.n0, m + self.m0

    def triangles(self) -> np.ndarray:
        tris = []
        for m in range(self.m0, self.m0 + self.rows - 1):
            for n in range(self.n0, self.n0 + self.cols - 1):
                a = self.index(n, m)
                b = self.index(n + 1, m)
                c = self.index(n + 1, m + 1)
                d = self.index(n, m + 1)
                tris.append((a, b, d))
                tris.append((b, c, d))
        return np.asarray(tris, dtype=np.int64)

    def center_vertex(self) -> int:
        """An interior vertex as close to the middle of the patch as possible."""
        n = self.n0 + min(max(1, (self.cols - 1) // 2), self.cols - 2)
        m = self.m0 + min(max(1, (self.rows - 1) // 2), self.rows - 2)
        return self.index(n, m)


def grid_edge_classes(patch: GridPatch, mesh: TriMesh) -> np.ndarray:
    """Class id per mesh edge: 1 diagonal, 2 column (m step), 3 row (n step)."""
    if mesh.n_vertices != patch.n_vertices:
        raise ValidationError("mesh does not match the grid patch")
    i = mesh.edges[:, 0]
    j = mesh.edges[:, 1]
    dn = (j % patch.cols) - (i % patch.cols)
    dm = (j // patch.cols) - (i // patch.cols)
    out = np.zeros(mesh.n_edges, dtype=np.int8)
    out[(dn == 1) & (dm == 0)] = CLASS_ROW
    out[(dn == 0) & (dm == 1)] = CLASS_COLUMN
    out[(dn == -1) & (dm == 1)] = CLASS_DIAGONAL
    if np.any(out == 0):
        raise ValidationError("mesh contains edges that are not grid edges")
    return out


def field_from_class_logs(patch: GridPatch, mesh: TriMesh, class_logs) -> CrossRatioField:
    """Constant-per-class cross ratio field on a grid mesh.

    ``class_logs`` is the log value for classes (diagonal, column, row).
    """
    class_logs = np.asarray(class_logs, dtype=complex)
    if class_logs.shape != (3,):
        raise ValidationError("need exactly three class logs")
    classes = grid_edge_classes(patch, mesh)
    logs = np.full(mesh.n_edges, np.nan + 1j * np.nan, dtype=complex)
    ids = mesh.interior_edge_ids
    logs[ids] = class_logs[classes[ids] - 1]
    return CrossRatioField(mesh=mesh, logs=logs)


# -- affine lattices ---------------------------------------------------------


@dataclass(frozen=True)
class LatticeSpec:
    """Affine image of the equilateral lattice, one angle triple per cell."""

    alpha: float
    beta: float
    rows: int
    cols: int

    def __post_init__(self):
        g = self.gamma
        if min(self.alpha, self.beta, g) <= 0.0:
            raise ValidationError("lattice angles must be positive and sum to pi")

    @property
    def gamma(self) -> float:
        return np.pi - self.alpha - self.beta

    @property
    def patch(self) -> GridPatch:
        return GridPatch(rows=self.rows, cols=self.cols)


def lattice_vertex(alpha: float, beta: float, n, m):
    """Position of lattice vertex (n, m)."""
    gamma = np.pi - alpha - beta
    return n * np.sin(alpha) + m * np.sin(beta) * np.exp(1j * gamma)


def gen_lattice(spec: LatticeSpec) -> TriMesh:
    """Triangulated lattice patch with the cell angles of the spec.

    In the lower cell triangle the angle at (n, m) is gamma, at (n+1, m) it
    is beta, and at (n, m+1) it is alpha.
    """
    patch = spec.patch
    nn, mm = np.meshgrid(np.arange(patch.cols), np.arange(patch.rows))
    verts = lattice_vertex(spec.alpha, spec.beta, nn.ravel(), mm.ravel())
    return build_mesh(verts, patch.triangles())


def lattice_cross_ratios(alpha: float, beta: float) -> tuple[complex, complex, complex]:
    """Log cross ratios of the three lattice edge classes.

    Returns (diagonal, column, row) logs; they always sum to 2 pi i.
    """
    gamma = np.pi - alpha - beta
    if min(alpha, beta, gamma) <= 0.0:
        raise ValidationError("lattice angles must be positive and sum to pi")
    sa, sb, sg = np.sin(alpha), np.sin(beta), np.sin(gamma)
    q1 = 2.0 * np.log(sb / sa) + 2j * gamma
    q2 = 2.0 * np.log(sa / sg) + 2j * beta
    q3 = 2.0 * np.log(sg / sb) + 2j * alpha
    return complex(q1), complex(q2), complex(q3)


def lattice_field(spec: LatticeSpec) -> CrossRatioField:
    """Cross ratio field of the lattice, built from the class formulas."""
    mesh = gen_lattice(spec)
    return field_from_class_logs(spec.patch, mesh, lattice_cross_ratios(spec.alpha, spec.beta))


_SOLVE_MAX_ITER = 60
_SOLVE_TOL = 1e-12
_SIMPLEX_MARGIN = 1e-9


def solve_lattice_for_targets(
    targets, theta: float, init: tuple[float, float] = (np.pi / 3, np.pi / 3)
) -> tuple[float, float, float]:
    """Angles (alpha, beta, gamma) whose class logs hit prescribed rotated parts.

    Solves Re(e^{-i theta} log Q_k(alpha, beta)) = targets[k] for the three
    edge classes. The targets must sum to 2 pi sin(theta); otherwise no
    lattice exists and SumConstraintViolated is raised. Infeasible targets
    inside the constraint plane (no angle pair reaches them) raise
    Infeasible.
    """
    t = np.asarray(targets, dtype=float)
    if t.shape != (3,):
        raise ValidationError("need three class targets")
    total = float(np.sum(t))
    want = TWO_PI * np.sin(theta)
    if abs(total - want) > 1e-8 * max(1.0, abs(want)):
        raise SumConstraintViolated(
            f"class targets sum to {total:.12g}, a lattice requires {want:.12g}"
        )
    rot = np.exp(-1j * theta)

    def residual(a, b):
        q1, q2, _ = lattice_cross_ratios(a, b)
        return np.array([(rot * q1).real - t[0], (rot * q2).real - t[1]])

    def jac(a, b):
        g = np.pi - a - b
        ca, cb, cg = 1.0 / np.tan(a), 1.0 / np.tan(b), 1.0 / np.tan(g)
        d1 = np.array([-2.0 * ca - 2.0j, 2.0 * cb - 2.0j])
        d2 = np.array([2.0 * ca + 2.0 * cg, 2.0 * cg + 2.0j])
        return np.vstack([(rot * d1).real, (rot * d2).real])

    a, b = float(init[0]), float(init[1])
    if min(a, b, np.pi - a - b) <= _SIMPLEX_MARGIN:
        raise ValidationError("initial angles must lie inside the simplex")
    r = residual(a, b)
    for _ in range(_SOLVE_MAX_ITER):
        if np.max(np.abs(r)) <= _SOLVE_TOL:
            return a, b, float(np.pi - a - b)
        try:
            step = np.linalg.solve(jac(a, b), -r)
        except np.linalg.LinAlgError as exc:
            raise Infeasible("singular Jacobian while solving for lattice angles") from exc
        lam = 1.0
        base = float(np.max(np.abs(r)))
        for _ in range(40):
            na, nb = a + lam * step[0], b + lam * step[1]
            if min(na, nb, np.pi - na - nb) > _SIMPLEX_MARGIN:
                rn = residual(na, nb)
                if np.max(np.abs(rn)) < base:
                    a, b, r = na, nb, rn
                    break
            lam *= 0.5
        else:
            raise Infeasible("no lattice angles reach the requested targets")
    raise Infeasible("lattice angle solve did not converge")


# -- spiral meshes -----------------------------------------------------------


@dataclass(frozen=True)
class DoyleSpec:
    """Orbit of a quad under two commuting similarities.

    The seed quad (A, B, C, D) is positively oriented; the first similarity
    sends the A-D edge to the B-C edge, the second sends A-B to D-C. Cells
    are split along the B-D diagonal by default ('bd'); 'ac' splits along
    the other one.
    """

    quad: tuple[complex, complex, complex, complex]
    rows: int
    cols: int
    diagonal: str = "bd"

    def __post_init__(self):
        if self.diagonal not in ("bd", "ac"):
            raise ValidationError("diagonal must be 'bd' or 'ac'")
        a, b, c, d = (complex(z) for z in self.quad)
        pts = (a, b, c, d)
        for k in range(4):
            u = pts[(k + 1) % 4] - pts[k]
            w = pts[(k + 2) % 4] - pts[(k + 1) % 4]
            if (np.conj(u) * w).imag <= 0.0:
                raise ValidationError("seed quad must be convex and positively oriented")
        if abs(a - b) == 0 or abs(a - d) == 0:
            raise ValidationError("seed quad is degenerate")

    @property
    def similarities(self) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
        """(scale, offset) pairs (l1, u1), (l2, u2) with z -> l z + u."""
        a, b, c, d = (complex(z) for z in self.quad)
        l1 = (b - c) / (a - d)
        u1 = b - l1 * a
        l2 = (d - c) / (a - b)
        u2 = d - l2 * a
        return (l1, u1), (l2, u2)

    @property
    def patch(self) -> GridPatch:
        return GridPatch(rows=self.rows, cols=self.cols)


def gen_doyle(spec: DoyleSpec) -> TriMesh:
    """Mesh of the quad orbit V(n, m) = L1^n L2^m (A), split per cell."""
    (l1, u1), (l2, u2) = spec.similarities
    patch = spec.patch
    verts = np.empty(patch.n_vertices, dtype=complex)
    a = complex(spec.quad[0])
    row = np.empty(patch.cols, dtype=complex)
    row[0] = a
    for n in range(1, patch.cols):
        row[n] = l1 * row[n - 1] + u1
    verts[: patch.cols] = row
    for m in range(1, patch.rows):
        row = l2 * row + u2
        verts[m * patch.cols : (m + 1) * patch.cols] = row
    if spec.diagonal == "bd":
        tris = patch.triangles()
    else:
        tris = []
        for m in range(patch.rows - 1):
            for n in range(patch.cols - 1):
                a_ = m * patch.cols + n
                b_ = a_ + 1
                c_ = a_ + patch.cols + 1
                d_ = a_ + patch.cols
                tris.append((a_, b_, c_))
                tris.append((a_, c_, d_))
        tris = np.asarray(tris, dtype=np.int64)
    return build_mesh(verts, tris)


def _check_angle_triple(name: str, s: float):
    if abs(s - np.pi) > 1e-9:
        raise ValidationError(f"{name} angles must sum to pi, got {s:.12g}")


def doyle_cross_ratios(angles) -> tuple[complex, complex, complex]:
    """Log cross ratios of a spiral mesh from its six cell angles.

    ``angles`` = (a1..a6): a1, a2, a3 sit at A, B, D in the lower triangle
    (A, B, D); a4, a5, a6 sit at B, C, D in the upper triangle (B, C, D).
    Returns (diagonal, column, row) class logs; they sum to 2 pi i.
    """
    a1, a2, a3, a4, a5, a6 = (float(x) for x in angles)
    for x in (a1, a2, a3, a4, a5, a6):
        if not 0.0 < x < np.pi:
            raise ValidationError("cell angles must lie in (0, pi)")
    _check_angle_triple("lower triangle", a1 + a2 + a3)
    _check_angle_triple("upper triangle", a4 + a5 + a6)
    s = np.sin
    q1 = np.log(s(a6) * s(a2) / (s(a4) * s(a3))) + 1j * (a1 + a5)
    q2 = np.log(s(a3) * s(a4) / (s(a1) * s(a5))) + 1j * (a2 + a6)
    q3 = np.log(s(a5) * s(a1) / (s(a6) * s(a2))) + 1j * (a3 + a4)
    return complex(q1), complex(q2), complex(q3)


def doyle_quad_from_angles(angles, scale: float = 1.0):
    """Seed quad (A, B, C, D) realizing the six cell angles, with |AB| = scale.

    Needs a2 + a4 < pi and a3 + a6 < pi so the two triangles fit into a
    convex quad on opposite sides of the B-D diagonal.
    """
    a1, a2, a3, a4, a5, a6 = (float(x) for x in angles)
    for x in (a1, a2, a3, a4, a5, a6):
        if not 0.0 < x < np.pi:
            raise ValidationError("cell angles must lie in (0, pi)")
    _check_angle_triple("lower triangle", a1 + a2 + a3)
    _check_angle_triple("upper triangle", a4 + a5 + a6)
    if a2 + a4 >= np.pi or a3 + a6 >= np.pi:
        raise ValidationError("quad angles at B and D must each stay below pi")
    A = 0.0 + 0.0j
    B = complex(scale)
    D = scale * np.sin(a2) / np.sin(a3) * np.exp(1j * a1)
    bd = abs(D - B)
    dir_bd = (D - B) / bd
    C = B + bd * np.sin(a6) / np.sin(a5) * dir_bd * np.exp(-1j * a4)
    return A, B, C, complex(D)


def matched_lattice_angles(angles) -> tuple[float, float]:
    """Lattice (alpha, beta) whose class logs share the angle parts of a spiral.

    The imaginary parts of the three class logs of the lattice with
    gamma = (a1+a5)/2, beta = (a2+a6)/2, alpha = (a3+a4)/2 equal those of
    the spiral mesh with the given cell angles, class by class. The
    rotated-log real parts then agree for theta = pi/2.
    """
    a1, a2, a3, a4, a5, a6 = (float(x) for x in angles)
    alpha = 0.5 * (a3 + a4)
    beta = 0.5 * (a2 + a6)
    return alpha, beta


# -- conformally symmetric fields -------------------------------------------


@dataclass(frozen=True)
class ConfSymParams:
    """Parameters (a, b, c) of a multiplicative edge field on a centered grid."""

    a: complex
    b: complex
    c: complex
    rows: int
    cols: int

    def __post_init__(self):
        for z in (self.a, self.b, self.c):
            z = complex(z)
            if z == 0 or not np.isfinite(z.real) or not np.isfinite(z.imag):
                raise ValidationError("field parameters must be finite and nonzero")

    @property
    def patch(self) -> GridPatch:
        # Centered so the level indices straddle zero on both axes.
        return GridPatch(
            rows=self.rows, cols=self.cols, n0=1 - self.cols // 2, m0=1 - self.rows // 2
        )


def confsym_field(params: ConfSymParams) -> CrossRatioField:
    """Conformally symmetric cross ratio field on the centered grid.

    Row edges at height m carry a (abc)^{m-1}, column edges at offset n
    carry b (abc)^{n-1}, and the diagonal of cell (n, m) carries
    c (abc)^{1-n-m-1+1} = c (abc)^{-n-m}. Around the vertex (n, m) the
    three spoke value pairs are (a_m, b_n, c_{2-n-m}); opposite spokes are
    equal and the triple multiplies to exactly 1, so every flower closes.

    The attached mesh is an equilateral carrier: it supplies combinatorics
    for the field, not positions realizing it. Use grow_from_q for those.
    """
    patch = params.patch
    nn, mm = np.meshgrid(np.arange(patch.cols), np.arange(patch.rows))
    verts = (nn + mm * np.exp(1j * np.pi / 3)).ravel()
    mesh = build_mesh(verts, patch.triangles())
    classes = grid_edge_classes(patch, mesh)
    i = mesh.edges[:, 0]
    ni = (i % patch.cols) + patch.n0
    mi = (i // patch.cols) + patch.m0
    abc = complex(params.a) * complex(params.b) * complex(params.c)
    exponent = np.select(
        [classes == CLASS_ROW, classes == CLASS_COLUMN, classes == CLASS_DIAGONAL],
        [mi - 1, ni - 1, 1 - ni - mi],
    )
    base = np.select(
        [classes == CLASS_ROW, classes == CLASS_COLUMN, classes == CLASS_DIAGONAL],
        [np.full(mesh.n_edges, complex(params.a)), np.full(mesh.n_edges, complex(params.b)),
         np.full(mesh.n_edges, complex(params.c))],
    )
    values = base * np.power(abc, exponent)
    logs = np.full(mesh.n_edges, np.nan + 1j * np.nan, dtype=complex)
    ids = mesh.interior_edge_ids
    logs[ids] = log_mod_2pi(values[ids])
    return CrossRatioField(mesh=mesh, logs=logs)


def is_doyle_type(params: ConfSymParams, tol: float = 1e-12) -> bool:
    """True when |abc| = 1 and the angles of (a, b, c) sum to 2 pi.

    Exactly then the field is constant per class and the grown mesh is an
    orbit of two commuting similarities.
    """
    abc = complex(params.a) * complex(params.b) * complex(params.c)
    args = sum(float(np.mod(np.angle(z), TWO_PI)) for z in (params.a, params.b, params.c))
    return abs(abs(abc) - 1.0) <= tol and abs(args - TWO_PI) <= tol


# -- growth from edge data ---------------------------------------------------


@dataclass(frozen=True)
class GrowthFailure:
    kind: str
    vertex: int = -1
    edge: int = -1
    detail: str = ""


@dataclass(frozen=True)
class GrowthResult:
    ok: bool
    positions: np.ndarray  # (V,) complex, NaN where never placed
    placed: np.ndarray  # (V,) bool
    n_placed: int
    seed_vertex: int
    failures: tuple[GrowthFailure, ...]

    def mesh(self, base: TriMesh) -> TriMesh:
        """Mesh over the grown positions; only valid when growth succeeded."""
        if not self.ok:
            raise Infeasible("growth failed; no global mesh available")
        return build_mesh(self.positions, base.triangles)


def _seed_star_positions(ring_values, closing_tol: float = 1e-8):
    """Center and ring positions of a flower realizing the given spoke values.

    Sends the center to infinity: the ring becomes a polygon with edge
    vectors e_k = -q_k e_{k-1}; an inversion about an interior point brings
    the center back to a finite position at 0.
    """
    q = np.asarray(ring_values, dtype=complex)
    n = q.size
    e = np.empty(n, dtype=complex)
    e[0] = 1.0
    for k in range(1, n):
        e[k] = -q[k] * e[k - 1]
    if abs(-q[0] * e[n - 1] - 1.0) > closing_tol:
        raise Infeasible("spoke values have non-trivial holonomy at the seed")
    h = np.concatenate([[0.0 + 0.0j], np.cumsum(e)])[:n]
    if abs(np.sum(e)) > closing_tol * float(np.max(np.abs(e))):
        raise Infeasible("spoke values do not close up at the seed")
    candidates = [np.mean(h)]
    for k in range(n):
        candidates.append(0.5 * (h[k] + h[(k + 2) % n]))
    for w0 in candidates:
        if np.min(np.abs(h - w0)) < 1e-12 * float(np.max(np.abs(h - w0))):
            continue
        ring = 1.0 / (h - w0)
        if star_embedding_failure(0.0, ring) is None:
            return 0.0 + 0.0j, ring
    raise Infeasible("no embedded realization of the seed flower was found")


def grow_from_q(
    field: CrossRatioField,
    seed_vertex: int | None = None,
    rel_tol: float = 1e-6,
) -> GrowthResult:
    """Rebuild vertex positions from per-edge cross ratios.

    Starts from an embedded realization of the seed flower and walks
    outward over interior edges: whenever one of the two triangles of an
    edge is fully placed, the value of the edge determines the opposite
    apex. A fresh vertex is placed at the mean of all predictions that are
    ready at that moment; averaging damps the rounding noise that chained
    single predictions amplify by a constant factor per ring. Revisits
    must agree with already placed positions to within rel_tol of the
    local edge length, and every completed interior star must embed. The
    walk halts at the first failure and reports what was placed together
    with the failure inventory.

    Marching from a seed is still exponentially sensitive to rounding in
    the patch radius: beyond roughly 35 rings the accumulated noise of a
    perfectly consistent field can exceed the default rel_tol. Raise
    rel_tol for larger patches, knowing that genuine inconsistencies show
    up orders of magnitude above the noise floor.
    """
    mesh = field.mesh
    values = field.values
    if seed_vertex is None:
        ids = mesh.interior_vertex_ids
        if not ids.size:
            raise ValidationError("mesh has no interior vertex to seed from")
        # Prefer a central seed: reference position closest to the centroid.
        mid = np.mean(mesh.vertices)
        seed_vertex = int(ids[np.argmin(np.abs(mesh.vertices[ids] - mid))])

    fl = flower(mesh, int(seed_vertex))
    ring_edges = [mesh.edge_id(fl.center, r) for r in fl.ring]
    center_pos, ring_pos = _seed_star_positions(values[ring_edges])

    pos = np.full(mesh.n_vertices, np.nan + 1j * np.nan, dtype=complex)
    placed = np.zeros(mesh.n_vertices, dtype=bool)
    pos[fl.center] = center_pos
    placed[fl.center] = True
    for r, z in zip(fl.ring, ring_pos):
        pos[r] = z
        placed[r] = True

    neighbors: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for a, b in mesh.edges:
        neighbors[a].append(int(b))
        neighbors[b].append(int(a))
    apex_edges: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for e in mesh.interior_edge_ids:
        apex_edges[int(mesh.edge_left_apex[e])].append(int(e))
        apex_edges[int(mesh.edge_right_apex[e])].append(int(e))
    interior_v = np.zeros(mesh.n_vertices, dtype=bool)
    interior_v[mesh.interior_vertex_ids] = True
    star_checked = np.zeros(mesh.n_vertices, dtype=bool)
    star_checked[fl.center] = True  # embedded by seed construction

    def tri_placed(t: int) -> bool:
        a, b, c = mesh.triangles[t]
        return placed[a] and placed[b] and placed[c]

    def star_complete(v: int) -> bool:
        return placed[v] and all(placed[w] for w in neighbors[v])

    failures: list[GrowthFailure] = []

    def check_star(v: int) -> bool:
        if star_checked[v] or not interior_v[v] or not star_complete(v):
            return True
        star_checked[v] = True
        f = flower(mesh, v)
        reason = star_embedding_failure(pos[v], pos[np.asarray(f.ring)])
        if reason is not None:
            failures.append(GrowthFailure(kind="flower_not_embedded", vertex=v, detail=reason))
            return False
        return True

    queue: deque[int] = deque()
    queued = np.zeros(mesh.n_edges, dtype=bool)

    def push_frontier(t: int):
        for e in mesh.tri_edges[t]:
            if mesh.interior_mask[e] and not queued[e]:
                queued[e] = True
                queue.append(int(e))

    for t in fl.triangles:
        push_frontier(t)

    def predict(e: int):
        """Apex prediction across edge e, or (None, reason)."""
        i, j = mesh.edges[e]
        k = int(mesh.edge_left_apex[e])
        l = int(mesh.edge_right_apex[e])
        q = values[e]
        if placed[l] and placed[i] and placed[j]:
            target = k
            r = q * (pos[l] - pos[j]) / (pos[i] - pos[l])
            num = pos[j] + r * pos[i]
        elif placed[k] and placed[i] and placed[j]:
            target = l
            r = q * (pos[k] - pos[i]) / (pos[j] - pos[k])
            num = pos[i] + r * pos[j]
        else:
            return None, None, "not_ready"
        den = 1.0 + r
        scale = abs(pos[i] - pos[j])
        if not np.isfinite(den) or abs(den) <= 1e-12 * max(1.0, abs(r)):
            return None, None, "degenerate"
        z = num / den
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            return None, None, "degenerate"
        return target, z, scale

    while queue:
        e = queue.popleft()
        queued[e] = False
        target, z, info = predict(int(e))
        if target is None:
            if info == "not_ready":
                continue
            failures.append(GrowthFailure(kind="placement_degenerate", edge=int(e)))
            break
        scale = info
        if placed[target]:
            if abs(z - pos[target]) > rel_tol * max(scale, 1e-300):
                failures.append(
                    GrowthFailure(
                        kind="inconsistent_revisit",
                        edge=int(e),
                        vertex=int(target),
                        detail=f"mismatch {abs(z - pos[target]):.3e} vs edge {scale:.3e}",
                    )
                )
                break
            continue
        acc, count = z, 1
        for e2 in apex_edges[target]:
            if e2 == e:
                continue
            t2, z2, _ = predict(e2)
            if t2 == target:
                acc += z2
                count += 1
        pos[target] = acc / count
        placed[target] = True
        ok = True
        for v in [int(target)] + neighbors[target]:
            if not check_star(v):
                ok = False
                break
        if not ok:
            break
        for t in mesh.vertex_triangles[target]:
            if tri_placed(t):
                push_frontier(int(t))

    if not failures and not np.all(placed[np.unique(mesh.triangles.ravel())]):
        failures.append(GrowthFailure(kind="unreached_vertices"))
    n_placed = int(np.count_nonzero(placed))
    ok = not failures
    if not ok:
        log.info("growth halted after %d placed vertices: %s", n_placed, failures[0])
    return GrowthResult(
        ok=ok,
        positions=pos,
        placed=placed,
        n_placed=n_placed,
        seed_vertex=int(seed_vertex),
        failures=tuple(failures),
    )


# -- one-parameter families --------------------------------------------------


def doyle_family(base_logs, target_logs, theta: float, t: float):
    """Class logs interpolating two lattices along a theta-conformal path.

    Both inputs are class log triples (diagonal, column, row). The path
    keeps Re(e^{-i theta} log q) frozen at the base values while sliding
    the complementary part linearly to the target, so every member is a
    theta-conformal deformation of the base and t = 0 reproduces it.
    """
    base = np.asarray(base_logs, dtype=complex)
    tgt = np.asarray(target_logs, dtype=complex)
    if base.shape != (3,) or tgt.shape != (3,):
        raise ValidationError("class log triples must have three entries")
    rot = np.exp(-1j * theta)
    r = (rot * base).real
    i0 = (rot * base).imag
    i1 = (rot * tgt).imag
    mix = (1.0 - t) * i0 + t * i1
    out = np.exp(1j * theta) * (r + 1j * mix)
    return complex(out[0]), complex(out[1]), complex(out[2])


# -- six-fold symmetry test --------------------------------------------------


@dataclass(frozen=True)
class ConfSymFlowerReport:
    symmetric: bool
    max_opposite_dev: float
    second_point: complex | None  # None encodes the point at infinity
    on_third_circle: bool
    max_harmonic_dev: float
    ok: bool


def _circle_coeffs(p1: complex, p2: complex, p3: complex) -> np.ndarray:
    """Implicit circle c0 (x^2+y^2) + c1 x + c2 y + c3 = 0 through 3 points."""
    rows = []
    for p in (p1, p2, p3):
        rows.append([abs(p) ** 2, p.real, p.imag, 1.0])
    m = np.asarray(rows)

    def minor(cols):
        return np.linalg.det(m[:, cols])

    c0 = minor([1, 2, 3])
    c1 = -minor([0, 2, 3])
    c2 = minor([0, 1, 3])
    c3 = -minor([0, 1, 2])
    return np.array([c0, c1, c2, c3])


def _eval_circle(c: np.ndarray, p: complex) -> float:
    return float(c[0] * abs(p) ** 2 + c[1] * p.real + c[2] * p.imag + c[3])


def check_conf_symmetric_flower(positions, tol: float = 1e-9) -> ConfSymFlowerReport:
    """Six-fold symmetry test for one valence-six flower.

    ``positions`` holds the center followed by the six ring vertices in
    counterclockwise order. Checks that opposite spoke values agree, that
    the three circles through the center and each pair of opposite ring
    vertices share a second point, and that this point separates each
    opposite pair harmonically (cross ratio -1). The second point is None
    when it lies at infinity, which happens exactly for point symmetric
    flowers.
    """
    z = np.asarray(positions, dtype=complex)
    if z.shape != (7,):
        raise ValidationError("need the center and six ring positions")
    z0 = z[0]
    ring = z[1:]
    scale = float(np.max(np.abs(ring - z0)))

    q = np.array(
        [
            cross_ratio(z0, ring[k - 1], ring[k], ring[(k + 1) % 6])
            for k in range(6)
        ]
    )
    opp = float(np.max(np.abs(q[:3] - q[3:]) / np.abs(q[:3])))
    symmetric = opp <= tol

    circles = [
        _circle_coeffs(z0, ring[k], ring[k + 3]) for k in range(3)
    ]
    # Normalize to make coefficient comparisons scale free.
    circles = [c / np.max(np.abs(c)) for c in circles]
    c1, c2, c3 = circles

    # Radical combination of the first two circles: a line through both
    # common points.
    l1 = c1[0] * c2[1] - c2[0] * c1[1]
    l2 = c1[0] * c2[2] - c2[0] * c1[2]
    line_norm = np.hypot(l1, l2)

    if abs(c1[0]) * scale <= tol and abs(c2[0]) * scale <= tol:
        # Both circles are lines through the center: second point at infinity.
        second: complex | None = None
        on_third = abs(c3[0]) * scale <= tol
        # Harmonic separation with one point at infinity reduces to point
        # symmetry of each opposite pair about the center.
        cr_dev = [
            abs(-(ring[k] - z0) / (z0 - ring[k + 3]) - (-1.0)) for k in range(3)
        ]
        max_dev = float(np.max(cr_dev))
    else:
        if line_norm == 0.0:
            raise Infeasible("the two circles coincide; no unique second point")
        d = complex(-l2, l1) / line_norm
        base = c1 if abs(c1[0]) >= abs(c2[0]) else c2
        a_ = base[0] * abs(d) ** 2
        b_ = 2.0 * base[0] * (np.conj(z0) * d).real + base[1] * d.real + base[2] * d.imag
        if abs(a_) <= 1e-300 or abs(b_ / a_) > 1e140:
            second = None
            on_third = abs(c3[0]) * scale <= tol
            cr_dev = [abs(-(ring[k] - z0) / (z0 - ring[k + 3]) + 1.0) for k in range(3)]
            max_dev = float(np.max(cr_dev))
        else:
            second = z0 - (b_ / a_) * d
            rel = max(1.0, abs(second - z0) / scale)
            on_third = abs(_eval_circle(c3, second)) <= tol * rel * rel * scale * scale
            cr_dev = [
                abs(cross_ratio(ring[k], z0, ring[k + 3], second) + 1.0) for k in range(3)
            ]
            max_dev = float(np.max(cr_dev))

    ok = symmetric and on_third and max_dev <= tol
    return ConfSymFlowerReport(
        symmetric=symmetric,
        max_opposite_dev=opp,
        second_point=second,
        on_third_circle=on_third,
        max_harmonic_dev=max_dev,
        ok=ok,
    )
