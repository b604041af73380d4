"""Variational solver for edge rotation fields.

The unknown is one real number omega per edge of an immersed triangulation.
Each triangle closes its deformed edges with stretch corrections nu
(trisolve.solve_nu); the per-edge sums of those corrections form a residual

    g_e = (nu_il - nu_lj) + (nu_jk - nu_ki) - t_e

over interior edges e = [v_i, v_j] with left apex k and right apex l, where
t_e is an optional prescribed offset. The residual vanishes exactly when
gluing the deformed triangles changes every interior log cross ratio by
e^{i theta} (i omega-part + targets), i.e. when the deformation is
theta-conformal up to the targets.

The map omega -> g is the gradient of a concave functional: its Jacobian is
symmetric, assembles from per-triangle cotangent stencils, and is negative
semidefinite with kernel spanned by the constant field (adding one constant
to every omega is a global spiral similarity). maximize() runs a damped
Newton ascent on it. The functional itself has closed forms at theta = 0
and theta = pi/2 (built from the Lobachevsky function); for other theta the
value is recovered as a line integral of the gradient, which closedness
makes path-independent.

Vertex-based variables are covered too: fields u of one real per vertex,
their closing residuals (vertex_gradient, via trisolve.solve_xi) and the
two closed-form energies in u.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad
from scipy.special import zeta

from .errors import (
    InfeasibleStep,
    NearDegenerate,
    NotConverged,
    OutsideDomain,
    SumConstraintViolated,
    ThetaconfError,
    ValidationError,
)
from .geom import TriMesh
from .trisolve import TriangleFrame, solve_nu, solve_xi

GRAD_TOL = 1e-10
MAX_ITER = 50
ANGLE_MARGIN = 1e-8
ARMIJO_SLOPE = 1e-4
MAX_HALVINGS = 30
SHIFT_BASE = 1e-12

# Chebyshev-free series for the Lobachevsky function: the zeta tail of
# Cl2(x)/2 converges geometrically once |x| <= pi.
_LOB_TERMS = 25
_LOB_COEF = np.array(
    [
        zeta(2 * m) / (m * (2 * m + 1) * (2.0 * np.pi) ** (2 * m))
        for m in range(1, _LOB_TERMS + 1)
    ]
)


@dataclass
class OmegaField:
    """Edge rotation variables with Dirichlet mask and per-edge targets.

    ``value`` and ``fixed`` run over all edges of the mesh; ``target`` runs
    over interior edges only, aligned with ``mesh.interior_edge_ids``. Fixed
    edges keep their value during maximize; by default the boundary edges
    are the fixed ones.
    """

    mesh: TriMesh
    value: np.ndarray
    fixed: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        E = self.mesh.n_edges
        self.value = np.asarray(self.value, dtype=float)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        self.target = np.asarray(self.target, dtype=float)
        if self.value.shape != (E,) or self.fixed.shape != (E,):
            raise ValidationError("value and fixed masks must have one entry per edge")
        if self.target.shape != (self.mesh.interior_edge_ids.size,):
            raise ValidationError("targets must have one entry per interior edge")
        if not np.all(np.isfinite(self.value)) or not np.all(np.isfinite(self.target)):
            raise ValidationError("omega values and targets must be finite")

    @classmethod
    def zeros(cls, mesh: TriMesh, targets=None, fix_boundary: bool = True) -> "OmegaField":
        fixed = np.zeros(mesh.n_edges, dtype=bool)
        if fix_boundary:
            fixed[mesh.boundary_edge_ids] = True
        if targets is None:
            targets = np.zeros(mesh.interior_edge_ids.size)
        return cls(mesh=mesh, value=np.zeros(mesh.n_edges), fixed=fixed, target=targets)

    def with_value(self, value) -> "OmegaField":
        return replace(self, value=np.asarray(value, dtype=float))

    @property
    def free_edge_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)


@dataclass
class SolveReport:
    iterations: int
    gradient_norm_history: list
    final_max_residual: float
    per_edge_residuals: np.ndarray
    failures: list = dc_field(default_factory=list)
    converged: bool = False


@dataclass
class VertexField:
    """Vertex scale variables with target angle sums and edge angle data.

    ``Theta`` is the desired total corner angle at each vertex (2 pi keeps
    an interior vertex flat); ``Phi`` holds per-edge angle parameters used
    by the theta = pi/2 functional (opposite-apex angle sums).
    """

    u: np.ndarray
    Theta: np.ndarray | None = None
    Phi: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.Theta is not None:
            self.Theta = np.asarray(self.Theta, dtype=float)
        if self.Phi is not None:
            self.Phi = np.asarray(self.Phi, dtype=float)

    @classmethod
    def flat(cls, mesh: TriMesh, frames: TriangleFrame) -> "VertexField":
        """All-zero u; interior Theta = 2 pi, boundary Theta = reference sums."""
        theta_t = _corner_angle_sums(mesh, frames.angles)
        theta_t[mesh.interior_vertex_ids] = 2.0 * np.pi
        return cls(u=np.zeros(mesh.n_vertices), Theta=theta_t, Phi=apex_angle_sums(mesh, frames.angles))

    def validate(self, mesh: TriMesh) -> None:
        if self.u.shape != (mesh.n_vertices,):
            raise ValidationError("u must have one entry per vertex")
        if self.Theta is not None:
            if self.Theta.shape != (mesh.n_vertices,):
                raise ValidationError("Theta must have one entry per vertex")
            n_tris = np.array([len(s) for s in mesh.vertex_triangles])
            if np.any(self.Theta <= 0.0) or np.any(self.Theta >= 2.0 * np.pi * (n_tris + 1)):
                raise ValidationError("Theta out of the realizable range at some vertex")
        if self.Phi is not None:
            if self.Phi.shape != (mesh.n_edges,):
                raise ValidationError("Phi must have one entry per edge")
            inner = self.Phi[mesh.interior_edge_ids]
            if np.any(inner <= 0.0) or np.any(inner >= np.pi):
                raise ValidationError("interior Phi angles must lie in (0, pi)")


def _apex_slots(mesh: TriMesh):
    """Slot of the apex corner within the left/right triangle of each edge."""
    out = []
    for tris, apex in (
        (mesh.edge_left, mesh.edge_left_apex),
        (mesh.edge_right, mesh.edge_right_apex),
    ):
        has = tris >= 0
        slot = np.zeros(mesh.n_edges, dtype=np.int64)
        rows = mesh.triangles[tris[has]]
        slot[has] = np.argmax(rows == apex[has, None], axis=1)
        out.append((has, slot))
    return out


def apex_angle_sums(mesh: TriMesh, corner_angles: np.ndarray) -> np.ndarray:
    """Per edge, the sum of the corner angles facing it from both sides.

    Boundary edges have one facing corner and contribute just that angle.
    ``corner_angles`` is a (T, 3) array in triangle slot order.
    """
    corner_angles = np.asarray(corner_angles, dtype=float)
    total = np.zeros(mesh.n_edges)
    for (has, slot), tris in zip(_apex_slots(mesh), (mesh.edge_left, mesh.edge_right)):
        total[has] += corner_angles[tris[has], slot[has]]
    return total


def _corner_angle_sums(mesh: TriMesh, corner_angles: np.ndarray) -> np.ndarray:
    """Per vertex, the total corner angle over its incident triangles."""
    out = np.zeros(mesh.n_vertices)
    for c in range(3):
        np.add.at(out, mesh.triangles[:, c], corner_angles[:, c])
    return out


def _assemble_edge_sums(mesh: TriMesh, per_slot: np.ndarray) -> np.ndarray:
    """Accumulate nu[s+1] - nu[s+2] of every triangle onto its slot-s edge."""
    g = np.zeros(mesh.n_edges)
    for s in range(3):
        np.add.at(
            g,
            mesh.tri_edges[:, s],
            per_slot[:, (s + 1) % 3] - per_slot[:, (s + 2) % 3],
        )
    return g


def _interior_targets_full(field: OmegaField) -> np.ndarray:
    t = np.zeros(field.mesh.n_edges)
    t[field.mesh.interior_edge_ids] = field.target
    return t


def gradient(
    mesh: TriMesh,
    frames: TriangleFrame,
    field: OmegaField,
    theta: float,
    all_edges: bool = False,
):
    """Closing residual of the rotation field, per interior edge.

    Solves every triangle for its stretch corrections and sums them around
    each edge, minus the field's targets. Zero residual on all interior
    edges means the deformation prescribed by omega glues into a
    theta-conformal map (up to the targets). With ``all_edges`` the raw
    sums on boundary edges (single triangle, no target) are included,
    making the result the differential of the underlying functional in all
    edge coordinates.

    Triangle-level failures (Infeasible, DegenerateImage) propagate with
    the failing triangle ids attached as ``indices``.
    """
    sol = solve_nu(frames, field.value[mesh.tri_edges], theta)
    sums = _assemble_edge_sums(mesh, sol.nu)
    if all_edges:
        return sums - _interior_targets_full(field)
    return sums[mesh.interior_edge_ids] - field.target


def hessian(
    mesh: TriMesh,
    frames: TriangleFrame,
    field: OmegaField,
    theta: float,
    solution=None,
) -> sp.csr_matrix:
    """Second derivative of the functional, restricted to free edges.

    Assembled from one 3x3 cotangent stencil per triangle: edges sharing a
    corner couple with +cot of the image angle there, diagonals balance the
    row to zero. The full (nothing fixed) matrix is symmetric negative
    semidefinite with kernel spanned by the constant field; fixing at least
    one edge of every connected component makes it definite. Rows and
    columns follow ``field.free_edge_ids``.
    """
    if solution is None:
        solution = solve_nu(frames, field.value[mesh.tri_edges], theta)
    ang = solution.image_angles
    margin = np.minimum(ang, np.pi - ang)
    if np.any(margin < ANGLE_MARGIN):
        exc = NearDegenerate("image angles too close to 0 or pi for a stable Hessian")
        exc.indices = np.flatnonzero(np.any(margin < ANGLE_MARGIN, axis=-1))
        raise exc
    cot = 1.0 / np.tan(ang)
    rows, cols, data = [], [], []
    for s in range(3):
        e_s = mesh.tri_edges[:, s]
        e_n = mesh.tri_edges[:, (s + 1) % 3]
        shared = cot[:, (s + 1) % 3]  # corner between edge slots s and s+1
        rows += [e_s, e_n, e_s]
        cols += [e_n, e_s, e_s]
        data += [shared, shared, -(cot[:, s] + cot[:, (s + 1) % 3])]
    E = mesh.n_edges
    H = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(E, E),
    ).tocsr()
    free = field.free_edge_ids
    return H[free][:, free].tocsr()


def _solve_sparse(H: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    """Direct sparse solve with a diagonal shift fallback for singular H."""
    scale = float(np.max(np.abs(H.data))) if H.nnz else 1.0
    shift = 0.0
    for _ in range(48):
        try:
            mat = H if shift == 0.0 else H - shift * sp.identity(H.shape[0], format="csr")
            out = spla.splu(mat.tocsc()).solve(rhs)
            if np.all(np.isfinite(out)):
                return out
        except RuntimeError:
            pass
        shift = SHIFT_BASE * scale if shift == 0.0 else 2.0 * shift
    raise NotConverged("sparse Newton system could not be factorized")


def maximize(
    mesh: TriMesh,
    frames: TriangleFrame,
    field: OmegaField,
    theta: float,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    pin: str = "auto",
):
    """Newton ascent to a critical rotation field; returns (field, report).

    Solves H delta = -g on the free edges with Armijo backtracking measured
    on the residual norm. ``pin`` handles the constant-field kernel when
    nothing is fixed: "mean" constrains the free mean to zero through a
    bordered system, "edge:<id>" freezes one edge, "none" trusts the fixed
    mask, and "auto" picks "mean" exactly when no edge is fixed. Raises
    NotConverged (partial report attached) or InfeasibleStep when every
    backtracked step left the feasible set.
    """
    free = field.free_edge_ids
    if pin == "auto":
        pin = "mean" if free.size == mesh.n_edges else "none"
    if pin.startswith("edge:"):
        try:
            pinned = int(pin.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad pin spec {pin!r}")
        if pinned not in free:
            raise ValidationError(f"pinned edge {pinned} is already fixed")
        free = free[free != pinned]
    elif pin not in ("mean", "none"):
        raise ValidationError(f"unknown pin mode {pin!r}")
    if pin == "none" and free.size == mesh.n_edges and free.size > 0:
        raise ValidationError(
            "nothing pins the constant direction: fix an edge or pin the mean"
        )
    if pin == "mean" and free.size == mesh.n_edges and abs(field.target.sum()) > 1e-9:
        # The three nu differences of a triangle telescope to zero, so the
        # residuals always sum to -sum(targets); when every edge equation
        # is active, unbalanced targets leave nothing to absorb that.
        raise SumConstraintViolated(
            "with every edge free the targets must sum to zero "
            f"(got {field.target.sum():.3e})"
        )

    value = field.value.copy()
    if pin == "mean" and free.size:
        value[free] -= value[free].mean()
    t_full = _interior_targets_full(field)
    history: list = []
    failures: list = []

    def residual(v):
        sol = solve_nu(frames, v[mesh.tri_edges], theta)
        return _assemble_edge_sums(mesh, sol.nu) - t_full, sol

    g_full, sol = residual(value)
    g = g_full[free]
    gmax = float(np.max(np.abs(g))) if free.size else 0.0
    history.append(gmax)
    iterations = 0
    converged = gmax <= tol

    while not converged:
        if iterations >= max_iter:
            report = SolveReport(
                iterations=iterations,
                gradient_norm_history=history,
                final_max_residual=gmax,
                per_edge_residuals=g_full[mesh.interior_edge_ids],
                failures=failures,
                converged=False,
            )
            exc = NotConverged(
                f"no convergence after {iterations} Newton steps "
                f"(residual {gmax:.3e}, tol {tol:.1e})",
                iterations=iterations,
                residual=gmax,
            )
            exc.report = report
            raise exc

        fslice = replace(field, value=value)
        H = hessian(mesh, frames, fslice, theta, solution=None)
        # hessian() slices by the field's own free mask; re-slice for pins.
        if free.size != field.free_edge_ids.size:
            keep = np.searchsorted(field.free_edge_ids, free)
            H = H[keep][:, keep].tocsr()
        if pin == "mean":
            ones = sp.csr_matrix(np.ones((free.size, 1)))
            K = sp.bmat([[H, ones], [ones.T, None]], format="csr")
            delta = _solve_sparse(K, np.concatenate([-g, [0.0]]))[:-1]
        else:
            delta = _solve_sparse(H, -g)

        lam = 1.0
        step_err = None
        accepted = False
        for _ in range(MAX_HALVINGS):
            trial = value.copy()
            trial[free] += lam * delta
            try:
                gt_full, _ = residual(trial)
            except ThetaconfError as err:
                step_err = err
                failures.append(
                    {
                        "iteration": iterations,
                        "step": lam,
                        "error": type(err).__name__,
                        "detail": str(err),
                        "triangles": getattr(err, "indices", None),
                    }
                )
                lam *= 0.5
                continue
            gt = float(np.max(np.abs(gt_full[free])))
            if gt <= (1.0 - ARMIJO_SLOPE * lam) * gmax or gt <= tol:
                value = trial
                g_full, g, gmax = gt_full, gt_full[free], gt
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if step_err is not None:
                raise InfeasibleStep(
                    "every backtracked step hit infeasible triangles"
                ) from step_err
            exc = NotConverged(
                "line search stalled without residual decrease",
                iterations=iterations,
                residual=gmax,
            )
            exc.report = SolveReport(
                iterations=iterations,
                gradient_norm_history=history,
                final_max_residual=gmax,
                per_edge_residuals=g_full[mesh.interior_edge_ids],
                failures=failures,
                converged=False,
            )
            raise exc

        iterations += 1
        history.append(gmax)
        converged = gmax <= tol

    report = SolveReport(
        iterations=iterations,
        gradient_norm_history=history,
        final_max_residual=gmax,
        per_edge_residuals=g_full[mesh.interior_edge_ids],
        failures=failures,
        converged=True,
    )
    return field.with_value(value), report


def functional_value(
    mesh: TriMesh,
    frames: TriangleFrame,
    field: OmegaField,
    theta: float,
    base_value=None,
) -> float:
    """Functional difference between the field and a base field.

    No closed form exists for general theta, but the gradient one-form is
    closed, so the straight-segment line integral from ``base_value``
    (default all zero) is path independent and serves as a diagnostic
    value. Computed by adaptive quadrature.
    """
    base = np.zeros(mesh.n_edges) if base_value is None else np.asarray(base_value, float)
    d = field.value - base
    if not np.any(d):
        return 0.0
    ids = mesh.interior_edge_ids
    d_int = d[ids]

    def integrand(s):
        f_s = field.with_value(base + s * d)
        return float(np.dot(gradient(mesh, frames, f_s, theta), d_int))

    val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------------------
# Lobachevsky function and triangle potentials


def _lob_series(y):
    """Zeta series for the Lobachevsky function, meant for |y| <= pi/2."""
    th = 2.0 * y
    t2 = th * th
    tail = np.zeros_like(th)
    for coef in _LOB_COEF[::-1]:
        tail = tail * t2 + coef
    safe = np.where(th == 0.0, 1.0, np.abs(th))
    val = 0.5 * (th - th * np.log(safe) + th * t2 * tail)
    return np.where(th == 0.0, 0.0, val)


def lobachevsky(x):
    """The Lobachevsky function -\\int_0^x log|2 sin t| dt.

    Odd, pi-periodic, maximal at pi/6. Evaluated by periodic reduction and
    a zeta series accurate to about 1e-13. Arguments within pi/4 of a half
    period are folded through the duplication identity
    L(pi/2 - s) = L(s) - L(2 s) / 2, which keeps the zero at pi/2 exact.
    Accepts arrays.
    """
    x = np.asarray(x, dtype=float)
    y = x - np.pi * np.round(x / np.pi)
    s = np.pi / 2 - np.abs(y)
    folded = np.sign(y) * (_lob_series(s) - 0.5 * _lob_series(2.0 * s))
    val = np.where(s < np.pi / 4, folded, _lob_series(y))
    return val if val.ndim else float(val)


def _angles_from_log_sides(rho) -> np.ndarray:
    """Corner angles of the triangle with side lengths exp(rho), slots as
    corners (corner s faces edge slot (s+1)%3). Clipping the cosine gives
    the continuous extension: a side reaching the sum of the other two
    sends the opposite angle to pi and the rest to 0, and stays there.
    """
    rho = np.asarray(rho, dtype=float)
    l = np.exp(rho)
    ang = np.empty_like(l)
    for s in range(3):
        a = l[..., s]
        b = l[..., (s + 2) % 3]
        c = l[..., (s + 1) % 3]
        cosv = (a * a + b * b - c * c) / (2.0 * a * b)
        ang[..., s] = np.arccos(np.clip(cosv, -1.0, 1.0))
    return ang


def _triangle_potential(rho, lob_coeff: float):
    """sum_s rho_s * (opposite angle) + lob_coeff * sum_s Lob(angle_s)."""
    rho = np.asarray(rho, dtype=float)
    ang = _angles_from_log_sides(rho)
    opp = np.take(ang, [2, 0, 1], axis=-1)  # angle facing edge slot s
    val = np.sum(rho * opp, axis=-1) + lob_coeff * np.sum(lobachevsky(ang), axis=-1)
    return val


def vhat(rho12, rho23, rho31):
    """Triangle potential with doubled Lobachevsky terms.

    Value of the displayed closed form: with angles alpha_s of the triangle
    whose side lengths are exp(rho), returns sum rho * (opposite alpha)
    + 2 sum Lob(alpha). Outside the triangle inequality the continuous
    affine extension pi * rho_longest is used. Note the doubled Lobachevsky
    sum makes the rho-derivatives differ from the opposite angles by a
    log-sin correction; vhat_exact carries the variant whose derivatives
    are exactly the angles.
    """
    rho = np.stack(np.broadcast_arrays(
        np.asarray(rho12, float), np.asarray(rho23, float), np.asarray(rho31, float)
    ), axis=-1)
    return _triangle_potential(rho, 2.0)


def vhat_exact(rho12, rho23, rho31):
    """Triangle potential with single Lobachevsky terms.

    Same structure as vhat but with coefficient 1 on the Lobachevsky sum;
    this is the variant satisfying d/d rho_e = angle opposite e exactly, so
    it is the one the assembled functionals differentiate through.
    """
    rho = np.stack(np.broadcast_arrays(
        np.asarray(rho12, float), np.asarray(rho23, float), np.asarray(rho31, float)
    ), axis=-1)
    return _triangle_potential(rho, 1.0)


# ---------------------------------------------------------------------------
# Closed-form functionals in omega at the two endpoint thetas


def functional_value_pi2(
    mesh: TriMesh, frames: TriangleFrame, field: OmegaField, Phi
) -> float:
    """Concave functional whose critical points solve theta = pi/2.

    F(omega) = -sum over triangles of the exact triangle potential at
    log side lengths log|w| - omega, minus sum over edges of Phi_e omega_e.
    Phi is one angle per edge (for the reference pattern itself, the sums
    of the facing corner angles: apex_angle_sums). Defined on all of R^E
    through the potential's affine extension and concave throughout.
    """
    Phi = np.asarray(Phi, dtype=float)
    if Phi.shape != (mesh.n_edges,):
        raise ValidationError("Phi must have one entry per edge")
    om_tri = field.value[mesh.tri_edges]
    rho = np.log(np.abs(frames.w)) - om_tri
    total = float(np.sum(_triangle_potential(rho, 1.0)))
    return -total - float(np.dot(Phi, field.value))


def functional_gradient_pi2(
    mesh: TriMesh, frames: TriangleFrame, field: OmegaField, Phi
) -> np.ndarray:
    """Analytic gradient of functional_value_pi2, per edge.

    The potential's rho-derivatives are the opposite angles, so the
    derivative in omega_e is the (extended) image angle sum facing e minus
    Phi_e. Coincides on interior edges with gradient(..., theta=pi/2) when
    Phi = reference apex sums + targets.
    """
    Phi = np.asarray(Phi, dtype=float)
    om_tri = field.value[mesh.tri_edges]
    rho = np.log(np.abs(frames.w)) - om_tri
    ang = _angles_from_log_sides(rho)
    return apex_angle_sums(mesh, ang) - Phi


def functional_value_0(mesh: TriMesh, frames: TriangleFrame, field: OmegaField) -> float:
    """Concave functional whose critical points solve theta = 0.

    Per triangle, with shifted angles A_s = alpha_s + omega_in - omega_out
    (the image angles at theta = 0):

        sum_s Lob(A_s) + sum_s (A_s - alpha_s) log|w_facing(s)|.

    Only differences of omega enter, so constants are gauge. Raises
    OutsideDomain when a shifted angle leaves (0, pi).
    """
    om_tri = field.value[mesh.tri_edges]
    shift = np.take(om_tri, [2, 0, 1], axis=-1) - om_tri
    A = frames.angles + shift
    if np.any(A <= 0.0) or np.any(A >= np.pi):
        exc = OutsideDomain("a shifted corner angle left (0, pi)")
        exc.indices = np.flatnonzero(np.any((A <= 0.0) | (A >= np.pi), axis=-1))
        raise exc
    facing = np.log(np.abs(np.take(frames.w, [1, 2, 0], axis=-1)))
    return float(np.sum(lobachevsky(A)) + np.sum(shift * facing))


def functional_gradient_0(mesh: TriMesh, frames: TriangleFrame, field: OmegaField) -> np.ndarray:
    """Analytic gradient of functional_value_0, assembled per edge.

    Each triangle contributes log(2 sin A_s) - log(2 sin A_{s+1})
    + log|w_{s+2}| - log|w_{s+1}| to its slot-s edge; this equals the
    nu-difference sum of gradient(..., theta=0) on interior edges.
    """
    om_tri = field.value[mesh.tri_edges]
    shift = np.take(om_tri, [2, 0, 1], axis=-1) - om_tri
    A = frames.angles + shift
    if np.any(A <= 0.0) or np.any(A >= np.pi):
        exc = OutsideDomain("a shifted corner angle left (0, pi)")
        exc.indices = np.flatnonzero(np.any((A <= 0.0) | (A >= np.pi), axis=-1))
        raise exc
    logsin = np.log(2.0 * np.sin(A))
    logw = np.log(np.abs(frames.w))
    g = np.zeros(mesh.n_edges)
    for s in range(3):
        np.add.at(
            g,
            mesh.tri_edges[:, s],
            logsin[:, s]
            - logsin[:, (s + 1) % 3]
            + logw[:, (s + 2) % 3]
            - logw[:, (s + 1) % 3],
        )
    return g


# ---------------------------------------------------------------------------
# Vertex variables


def vertex_gradient(
    mesh: TriMesh, frames: TriangleFrame, vfield: VertexField, theta: float
) -> np.ndarray:
    """Closing residual of vertex scale variables, per interior vertex.

    Each triangle is solved for corner rotations xi (solve_xi) under the
    per-corner scales u; around an interior vertex the cyclic sum of
    (xi at next corner - xi at previous corner) over its triangles must
    vanish for the flowers to close. Returns that sum, ordered like
    ``mesh.interior_vertex_ids``.
    """
    vfield.validate(mesh)
    sol = solve_xi(frames, vfield.u[mesh.triangles], theta)
    res = np.zeros(mesh.n_vertices)
    for c in range(3):
        np.add.at(
            res,
            mesh.triangles[:, c],
            sol.xi[:, (c + 2) % 3] - sol.xi[:, (c + 1) % 3],
        )
    return res[mesh.interior_vertex_ids]


def _scaled_log_sides(mesh: TriMesh, frames: TriangleFrame, u: np.ndarray) -> np.ndarray:
    """Per triangle slot, log |w_s| + (u_a + u_b)/2 for the edge corners."""
    uc = u[mesh.triangles]
    u_edge = 0.5 * (uc + np.roll(uc, -1, axis=-1))
    return np.log(np.abs(frames.w)) + u_edge


def energy_E0(mesh: TriMesh, frames: TriangleFrame, vfield: VertexField) -> float:
    """Vertex scale energy for theta = 0 deformations.

    E(u) = -sum over triangles of (exact potential at the scaled log sides
    minus (pi/2) times their sum) minus sum over vertices of Theta_i u_i/2.
    Critical exactly when every vertex angle sum of the scaled triangles
    meets its Theta. Concave; defined for all u via the potential's
    extension. The additive normalization is not pinned down by anything
    observable, only gradients matter.
    """
    vfield.validate(mesh)
    if vfield.Theta is None:
        raise ValidationError("energy_E0 needs target angle sums Theta")
    rho = _scaled_log_sides(mesh, frames, vfield.u)
    per_tri = _triangle_potential(rho, 1.0) - 0.5 * np.pi * rho.sum(axis=-1)
    return float(-np.sum(per_tri) - 0.5 * np.dot(vfield.Theta, vfield.u))


def energy_E0_gradient(mesh: TriMesh, frames: TriangleFrame, vfield: VertexField) -> np.ndarray:
    """Per-vertex derivative of energy_E0: (angle sum - Theta)/2."""
    vfield.validate(mesh)
    if vfield.Theta is None:
        raise ValidationError("energy_E0 needs target angle sums Theta")
    ang = _angles_from_log_sides(_scaled_log_sides(mesh, frames, vfield.u))
    return 0.5 * (_corner_angle_sums(mesh, ang) - vfield.Theta)


def energy_Epi2(mesh: TriMesh, frames: TriangleFrame, vfield: VertexField) -> float:
    """Vertex scale energy for theta = pi/2 deformations.

    Over interior edges [v_i, v_j] with apex angles alpha_k (left) and
    alpha_l (right):

        sum Lob(alpha_k + (u_j - u_i)/2) + Lob(alpha_l + (u_i - u_j)/2).

    Constants in u are gauge. Raises OutsideDomain when a shifted angle
    leaves (0, pi).
    """
    vfield.validate(mesh)
    a, b = _shifted_apex_angles(mesh, frames, vfield.u)
    return float(np.sum(lobachevsky(a)) + np.sum(lobachevsky(b)))


def energy_Epi2_gradient(mesh: TriMesh, frames: TriangleFrame, vfield: VertexField) -> np.ndarray:
    """Per-vertex derivative of energy_Epi2."""
    vfield.validate(mesh)
    a, b = _shifted_apex_angles(mesh, frames, vfield.u)
    ids = mesh.interior_edge_ids
    i = mesh.edges[ids, 0]
    j = mesh.edges[ids, 1]
    # d Lob / dx = -log|2 sin x|; u_i enters a with -1/2 and b with +1/2.
    la = np.log(2.0 * np.sin(a))
    lb = np.log(2.0 * np.sin(b))
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, i, 0.5 * (la - lb))
    np.add.at(out, j, 0.5 * (lb - la))
    return out


def _shifted_apex_angles(mesh: TriMesh, frames: TriangleFrame, u: np.ndarray):
    (hasL, slotL), (hasR, slotR) = _apex_slots(mesh)
    ids = mesh.interior_edge_ids
    i = mesh.edges[ids, 0]
    j = mesh.edges[ids, 1]
    aL = frames.angles[mesh.edge_left[ids], slotL[ids]]
    aR = frames.angles[mesh.edge_right[ids], slotR[ids]]
    a = aL + 0.5 * (u[j] - u[i])
    b = aR + 0.5 * (u[i] - u[j])
    if np.any(a <= 0) or np.any(a >= np.pi) or np.any(b <= 0) or np.any(b >= np.pi):
        raise OutsideDomain("a shifted apex angle left (0, pi)")
    return a, b
