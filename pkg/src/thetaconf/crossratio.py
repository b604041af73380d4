"""Cross ratios of interior edges and branch-consistent logarithms.

For an interior edge {i, j} (i < j) with left apex k (the triangle
traversing i->j) and right apex l, the edge value is the cross ratio

    q = cr(z_i, z_l, z_j, z_k),   cr(a, b, c, d) = (a-b)(c-d) / ((b-c)(d-a)).

Swapping i with j and k with l fixes q, so the value is a property of the
undirected edge. The logarithm is taken as

    log q = Log((z_i - z_l)/(z_j - z_l)) + Log((z_j - z_k)/(z_i - z_k)),

one principal branch per quotient. When both triangles are positively
oriented and embedded, each quotient lies in the open upper half plane, so
each summand has imaginary part in (0, pi) and the total in (0, 2 pi); the
imaginary part equals the sum of the two angles opposite the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryEdge, CoincidentPoints, ValidationError
from .geom import TriMesh

TWO_PI = 2.0 * np.pi


def cross_ratio(z1, z2, z3, z4):
    """cr(z1, z2, z3, z4) = (z1-z2)(z3-z4) / ((z2-z3)(z4-z1)). Broadcasts."""
    z1, z2, z3, z4 = (np.asarray(w, dtype=complex) for w in (z1, z2, z3, z4))
    den1 = z2 - z3
    den2 = z4 - z1
    if np.any(den1 == 0) or np.any(den2 == 0):
        raise CoincidentPoints("cross ratio of a degenerate point configuration")
    q = (z1 - z2) / den1 * (z3 - z4) / den2
    return complex(q) if q.ndim == 0 else q


def log_cross_ratio(z1, z2, z3, z4):
    """Branch-consistent log of cr(z1, z2, z3, z4).

    Computed as Log((z1-z2)/(z3-z2)) + Log((z3-z4)/(z1-z4)) with principal
    branches. Exact on the configurations this package produces (two
    positively oriented triangles over a shared edge); there each summand
    is the angle-decorated log of a point in the upper half plane.
    """
    z1, z2, z3, z4 = (np.asarray(w, dtype=complex) for w in (z1, z2, z3, z4))
    den1 = z3 - z2
    den2 = z1 - z4
    if np.any(den1 == 0) or np.any(den2 == 0):
        raise CoincidentPoints("log cross ratio of a degenerate point configuration")
    u = (z1 - z2) / den1
    w = (z3 - z4) / den2
    if np.any(u == 0) or np.any(w == 0):
        raise CoincidentPoints("log cross ratio of a degenerate point configuration")
    out = np.log(u) + np.log(w)
    return complex(out) if out.ndim == 0 else out


def log_mod_2pi(z):
    """Logarithm with imaginary part folded into [0, 2 pi). Broadcasts."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise CoincidentPoints("log of zero")
    out = np.log(z)
    out = out.real + 1j * np.mod(out.imag, TWO_PI)
    return complex(out) if out.ndim == 0 else out


@dataclass
class CrossRatioField:
    """Per-interior-edge cross ratio data attached to a mesh.

    ``logs`` has one complex entry per mesh edge; boundary edges hold NaN.
    The log is the primary datum (it carries the branch); ``values`` is the
    exponential. A field may come from positions or from a synthetic rule,
    in which case the mesh only supplies combinatorics.
    """

    mesh: TriMesh
    logs: np.ndarray

    def __post_init__(self):
        logs = np.asarray(self.logs, dtype=complex)
        if logs.shape != (self.mesh.n_edges,):
            raise ValidationError("field logs must have one entry per mesh edge")
        self.logs = logs

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.logs)

    def log(self, i: int, j: int) -> complex:
        e = self.mesh.edge_id(i, j)
        if not self.mesh.interior_mask[e]:
            raise BoundaryEdge(f"edge {{{i}, {j}}} is a boundary edge")
        return complex(self.logs[e])

    def value(self, i: int, j: int) -> complex:
        return complex(np.exp(self.log(i, j)))

    @classmethod
    def from_positions(cls, mesh: TriMesh, positions=None) -> "CrossRatioField":
        pts = mesh.positions_or(positions)
        logs = np.full(mesh.n_edges, np.nan + 1j * np.nan, dtype=complex)
        ids = mesh.interior_edge_ids
        if ids.size:
            i = mesh.edges[ids, 0]
            j = mesh.edges[ids, 1]
            k = mesh.edge_left_apex[ids]
            l = mesh.edge_right_apex[ids]
            logs[ids] = log_cross_ratio(pts[i], pts[l], pts[j], pts[k])
        return cls(mesh=mesh, logs=logs)


def edge_cross_ratio(mesh: TriMesh, edge, positions=None) -> complex:
    """Cross ratio of one interior edge, given as an id or an (i, j) pair."""
    if np.isscalar(edge) or isinstance(edge, (int, np.integer)):
        e = int(edge)
        if not 0 <= e < mesh.n_edges:
            raise ValidationError(f"edge id {e} out of range")
    else:
        i, j = edge
        e = mesh.edge_id(int(i), int(j))
    if not mesh.interior_mask[e]:
        raise BoundaryEdge(f"edge {tuple(mesh.edges[e])} is a boundary edge")
    pts = mesh.positions_or(positions)
    i, j = mesh.edges[e]
    k = mesh.edge_left_apex[e]
    l = mesh.edge_right_apex[e]
    return complex(cross_ratio(pts[i], pts[l], pts[j], pts[k]))


def theta_residual(log_q, log_target, theta: float):
    """Re(e^{-i theta} (log_q - log_target)), the per-edge defect."""
    rot = np.exp(-1j * theta)
    out = (rot * (np.asarray(log_q, dtype=complex) - np.asarray(log_target, dtype=complex))).real
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ThetaConformalReport:
    ok: bool
    theta: float
    max_residual: float
    residuals: np.ndarray  # (E,), NaN on boundary edges


def check_theta_conformal(
    mesh: TriMesh,
    image_positions,
    theta: float,
    reference_positions=None,
    tol: float = 1e-9,
) -> ThetaConformalReport:
    """Test whether image positions are a theta-conformal deformation.

    Compares the rotated-log real parts of the image and reference edge
    cross ratios over all interior edges.
    """
    ref = CrossRatioField.from_positions(mesh, reference_positions)
    img = CrossRatioField.from_positions(mesh, image_positions)
    res = np.full(mesh.n_edges, np.nan)
    ids = mesh.interior_edge_ids
    res[ids] = theta_residual(img.logs[ids], ref.logs[ids], theta)
    worst = float(np.max(np.abs(res[ids]))) if ids.size else 0.0
    return ThetaConformalReport(ok=worst <= tol, theta=theta, max_residual=worst, residuals=res)


@dataclass(frozen=True)
class FlowerClosingReport:
    """Multiplicative and additive closing defects of a spoke value cycle."""

    valence: int
    holonomy_defect: float
    closure_defect: float
    arg_sum: float
    arg_sum_expected: float
    ok: bool


def check_flower_closing(q_values, tol: float = 1e-10) -> FlowerClosingReport:
    """Closing conditions for the cross ratios around one interior vertex.

    ``q_values`` are the spoke values in counterclockwise ring order. After
    sending the center to infinity the ring becomes a closed polygon whose
    edge vectors satisfy e_k = -q_k e_{k-1}; the cycle must have trivial
    holonomy (the product of all -q_k equals 1) and sum to zero. At valence
    six these are the familiar product-equals-one and alternating-partial-
    product identities.
    """
    q = np.asarray(q_values, dtype=complex)
    if q.ndim != 1 or q.size < 3:
        raise ValidationError("need at least three spoke values")
    if np.any(q == 0) or not np.all(np.isfinite(q)):
        raise ValidationError("spoke values must be finite and nonzero")
    n = q.size
    e = np.empty(n, dtype=complex)
    e[0] = 1.0
    for k in range(1, n):
        e[k] = -q[k] * e[k - 1]
    scale = float(np.max(np.abs(e)))
    holonomy = -q[0] * e[n - 1]
    holonomy_defect = abs(holonomy - 1.0)
    closure_defect = abs(np.sum(e)) / scale
    arg_sum = float(np.sum(np.mod(np.angle(q), TWO_PI)))
    expected = (n - 2) * np.pi
    ok = holonomy_defect <= tol and closure_defect <= tol
    return FlowerClosingReport(
        valence=n,
        holonomy_defect=holonomy_defect,
        closure_defect=closure_defect,
        arg_sum=arg_sum,
        arg_sum_expected=expected,
        ok=ok,
    )


@dataclass(frozen=True)
class QuadDifferentialReport:
    max_vertex_sum: float
    max_face_sum: float
    max_direction_dev: float | None
    max_weighted_vertex_sum: float | None
    ok: bool


def check_quadratic_differential(
    mesh: TriMesh,
    qdot,
    theta: float | None = None,
    tol: float = 1e-8,
    positions=None,
) -> QuadDifferentialReport:
    """Test whether per-edge log-derivatives form a discrete quadratic differential.

    ``qdot`` holds one complex number per mesh edge (boundary entries are
    ignored). Checks that the sum over the interior edges at each interior
    vertex vanishes, that the sum over the three edges of each fully
    interior triangle vanishes, and, when ``theta`` is given, that every
    value lies on the line i e^{i theta} R. With ``positions`` (the
    immersion at which the derivative was taken) it also checks the
    companion condition: the sum of qdot weighted by the reciprocal of the
    outgoing edge vector vanishes at each interior vertex.
    """
    qdot = np.asarray(qdot, dtype=complex)
    if qdot.shape != (mesh.n_edges,):
        raise ValidationError("qdot must have one entry per mesh edge")
    interior = mesh.interior_mask
    vals = np.where(interior, qdot, 0.0)

    vertex_sum = np.zeros(mesh.n_vertices, dtype=complex)
    ids = mesh.interior_edge_ids
    np.add.at(vertex_sum, mesh.edges[ids, 0], vals[ids])
    np.add.at(vertex_sum, mesh.edges[ids, 1], vals[ids])
    inner = mesh.interior_vertex_ids
    max_vertex = float(np.max(np.abs(vertex_sum[inner]))) if inner.size else 0.0

    tri_interior = interior[mesh.tri_edges].all(axis=1)
    if np.any(tri_interior):
        face_sum = vals[mesh.tri_edges[tri_interior]].sum(axis=1)
        max_face = float(np.max(np.abs(face_sum)))
    else:
        max_face = 0.0

    max_weighted = None
    if positions is not None:
        z = np.asarray(positions, dtype=complex)
        if z.shape != (mesh.n_vertices,):
            raise ValidationError("positions must have one entry per vertex")
        w = z[mesh.edges[ids, 0]] - z[mesh.edges[ids, 1]]
        weighted = np.zeros(mesh.n_vertices, dtype=complex)
        np.add.at(weighted, mesh.edges[ids, 0], vals[ids] / w)
        np.add.at(weighted, mesh.edges[ids, 1], -vals[ids] / w)
        max_weighted = float(np.max(np.abs(weighted[inner]))) if inner.size else 0.0

    max_dir = None
    ok = max_vertex <= tol and max_face <= tol
    if max_weighted is not None:
        ok = ok and max_weighted <= tol
    if theta is not None:
        dev = np.abs((np.exp(-1j * theta) * vals[ids]).real) if ids.size else np.zeros(0)
        max_dir = float(np.max(dev)) if dev.size else 0.0
        ok = ok and max_dir <= tol
    return QuadDifferentialReport(
        max_vertex_sum=max_vertex,
        max_face_sum=max_face,
        max_direction_dev=max_dir,
        max_weighted_vertex_sum=max_weighted,
        ok=ok,
    )
