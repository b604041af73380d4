"""Per-triangle deformation solves.

A triangle with corner positions (z_i, z_j, z_k) is stored as a frame of
its directed edge vectors w = (w_ij, w_jk, w_ki), which sum to zero, plus
its reference corner angles. A deformation prescribes one real parameter
omega per edge slot and asks for real corrections nu so that the deformed
edges

    z_s = w_s exp(e^{i theta} (i omega_s + nu_s)),   s in {ij, jk, ki},

again close up to a triangle. At theta = 0 the omegas rotate edges and the
nus stretch them back shut; at theta = pi/2 the roles swap. Adding one
constant to all nus rescales the triangle, so nu is solved in the gauge
nu_jk = 0, leaving a two-dimensional Newton problem per triangle. All
solvers are batched over a leading triangle axis.

The corner angles of the solved image triangle obey a closed formula:

    alpha_s(image) = alpha_s(ref) + cos(theta) (omega_in - omega_out)
                                  + sin(theta) (nu_in - nu_out),

where "in" and "out" are the two edge slots meeting the corner s. The
solver cross-checks this formula against angles measured from the deformed
edges; a mismatch means the Newton iteration drifted to a different branch
and is reported as infeasible rather than returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImage, Infeasible, ValidationError
from .geom import TriMesh

NEWTON_MAX_ITER = 60
ARMIJO_SLOPE = 1e-4
MAX_HALVINGS = 30
RES_TOL_FACTOR = 1e-12
BRANCH_TOL = 1e-8


def _raise_marked(exc_cls, message, mask):
    """Raise exc_cls with the flat batch indices of failing triangles attached."""
    exc = exc_cls(message)
    exc.indices = np.flatnonzero(np.asarray(mask))
    raise exc


@dataclass
class TriangleFrame:
    """Edge vectors and reference angles of one or many triangles.

    ``w`` has shape (..., 3) holding (w_ij, w_jk, w_ki); ``angles`` has the
    matching shape with the reference angle at corner s in slot s.
    """

    w: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        if w.shape[-1] != 3:
            raise ValidationError("edge vectors must come in triples")
        closure = np.abs(w.sum(axis=-1))
        scale = np.max(np.abs(w), axis=-1)
        if np.any(scale == 0.0) or np.any(closure > 1e-9 * scale):
            raise ValidationError("edge vectors of a triangle must sum to zero")
        self.w = w
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.shape != w.shape:
            raise ValidationError("angles must match the edge vector shape")

    @classmethod
    def from_corners(cls, corners) -> "TriangleFrame":
        z = np.asarray(corners, dtype=complex)
        if z.shape[-1] != 3:
            raise ValidationError("corner positions must come in triples")
        w = np.stack(
            [
                z[..., 1] - z[..., 0],
                z[..., 2] - z[..., 1],
                z[..., 0] - z[..., 2],
            ],
            axis=-1,
        )
        return cls(w=w, angles=_corner_angles_from_edges(w))

    @classmethod
    def from_mesh(cls, mesh: TriMesh, positions=None) -> "TriangleFrame":
        pts = mesh.positions_or(positions)
        return cls.from_corners(pts[mesh.triangles])

    @property
    def shape(self):
        return self.w.shape[:-1]


def _corner_angles_from_edges(w: np.ndarray) -> np.ndarray:
    """Interior angle at corner s from directed edges; positive for CCW."""
    out = np.empty(w.shape, dtype=float)
    for s in range(3):
        out[..., s] = np.angle(-w[..., (s + 2) % 3] / w[..., s])
    return out


def deformed_edges(frame: TriangleFrame, omega, nu, theta: float) -> np.ndarray:
    """Edge vectors w_s exp(e^{i theta}(i omega_s + nu_s))."""
    omega = np.asarray(omega, dtype=float)
    nu = np.asarray(nu, dtype=float)
    rot = np.exp(1j * theta)
    return frame.w * np.exp(rot * (1j * omega + nu))


def image_angles(frame: TriangleFrame, omega, nu, theta: float) -> np.ndarray:
    """Corner angles of the deformed triangle by the closed formula."""
    omega = np.asarray(omega, dtype=float)
    nu = np.asarray(nu, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    out = np.empty(np.broadcast_shapes(frame.angles.shape, omega.shape), dtype=float)
    for s in range(3):
        sin_ = (s + 2) % 3
        out[..., s] = frame.angles[..., s] + ct * (omega[..., sin_] - omega[..., s]) + st * (
            nu[..., sin_] - nu[..., s]
        )
    return out


def measured_image_angles(frame: TriangleFrame, omega, nu, theta: float) -> np.ndarray:
    """Corner angles measured from the deformed edge vectors."""
    return _corner_angles_from_edges(deformed_edges(frame, omega, nu, theta))


@dataclass(frozen=True)
class NuSolution:
    nu: np.ndarray  # (..., 3), slot jk fixed to zero
    image_angles: np.ndarray  # (..., 3), by the closed formula
    residual: np.ndarray  # (...,) closing defect |sum of deformed edges|
    iterations: int
    theta: float


def _closing_residual(frame, omega, nu, rot):
    with np.errstate(over="ignore", invalid="ignore"):
        z = frame.w * np.exp(rot * (1j * np.asarray(omega) + nu))
        return z, z.sum(axis=-1)


def solve_nu(
    frame: TriangleFrame,
    omega,
    theta: float,
    init=None,
    max_iter: int = NEWTON_MAX_ITER,
) -> NuSolution:
    """Stretch corrections closing the deformed triangles.

    Damped Newton iteration in the gauge nu_jk = 0, batched over all
    triangles of the frame. Raises Infeasible when some triangle fails to
    converge or lands on a different solution branch, DegenerateImage when
    the solved image has a corner angle outside (0, pi).
    """
    omega = np.broadcast_to(np.asarray(omega, dtype=float), frame.w.shape).copy()
    rot = np.exp(1j * theta)
    if init is None:
        nu = np.zeros(frame.w.shape)
    else:
        nu = np.array(np.broadcast_to(np.asarray(init, dtype=float), frame.w.shape))
        nu = nu - nu[..., 1:2]  # re-gauge
    scale = np.max(np.abs(frame.w), axis=-1)
    tol = RES_TOL_FACTOR * scale

    if abs(np.sin(theta)) < 1e-15:
        # The stretch corrections drop out of the angle formula here, so a
        # degenerate image is detectable before iterating.
        fixed = frame.angles + np.cos(theta) * (
            np.take(omega, [2, 0, 1], axis=-1) - omega
        )
        if np.any(fixed <= 0.0) or np.any(fixed >= np.pi):
            _raise_marked(
                DegenerateImage,
                "prescribed rotations push a corner angle out of (0, pi)",
                np.any((fixed <= 0.0) | (fixed >= np.pi), axis=-1),
            )

    z, r = _closing_residual(frame, omega, nu, rot)
    f = np.abs(r) ** 2
    iterations = 0
    for it in range(max_iter):
        active = np.abs(r) > tol
        if not np.any(active):
            break
        iterations = it + 1
        # Newton step on (nu_ij, nu_ki); derivative of the closing sum with
        # respect to nu_s is e^{i theta} z_s.
        g0 = rot * z[..., 0]
        g2 = rot * z[..., 2]
        det = g0.real * g2.imag - g0.imag * g2.real
        bad = np.abs(det) <= 1e-300
        det = np.where(bad, 1.0, det)
        d0 = (-r.real * g2.imag + r.imag * g2.real) / det
        d2 = (-g0.real * r.imag + g0.imag * r.real) / det
        d0 = np.where(bad | ~active, 0.0, d0)
        d2 = np.where(bad | ~active, 0.0, d2)
        if np.any(bad & active):
            _raise_marked(
                Infeasible, "singular Newton system while closing a triangle", bad & active
            )

        lam = np.ones_like(f)
        best_nu = nu
        for _ in range(MAX_HALVINGS):
            trial = nu.copy()
            trial[..., 0] += lam * d0
            trial[..., 2] += lam * d2
            zt, rt = _closing_residual(frame, omega, trial, rot)
            with np.errstate(over="ignore"):
                ft = np.abs(rt) ** 2
            ft = np.where(np.isfinite(ft), ft, np.inf)
            good = (~active) | (ft <= f * (1.0 - ARMIJO_SLOPE * lam)) | (ft <= tol**2)
            if np.all(good):
                best_nu = trial
                break
            lam = np.where(good, lam, 0.5 * lam)
        else:
            # Keep the last trial for elements that improved at all.
            zt, rt = _closing_residual(frame, omega, trial, rot)
            ft = np.abs(rt) ** 2
            worse = ft > f
            trial[np.broadcast_to(worse[..., None], trial.shape)] = nu[
                np.broadcast_to(worse[..., None], trial.shape)
            ]
            best_nu = trial
        nu = best_nu
        z, r = _closing_residual(frame, omega, nu, rot)
        f = np.abs(r) ** 2

    if np.any(np.abs(r) > tol):
        n_bad = int(np.count_nonzero(np.abs(r) > tol))
        _raise_marked(
            Infeasible,
            f"triangle closing did not converge for {n_bad} triangle(s) "
            f"(worst residual {float(np.max(np.abs(r))):.3e})",
            np.abs(r) > tol,
        )

    formula = image_angles(frame, omega, nu, theta)
    if np.any(formula <= 0.0) or np.any(formula >= np.pi):
        _raise_marked(
            DegenerateImage,
            "a deformed corner angle left (0, pi)",
            np.any((formula <= 0.0) | (formula >= np.pi), axis=-1),
        )
    measured = _corner_angles_from_edges(z)
    if np.any(np.abs(formula - measured) > BRANCH_TOL):
        _raise_marked(
            Infeasible,
            "closing converged on a different branch (angle mismatch)",
            np.any(np.abs(formula - measured) > BRANCH_TOL, axis=-1),
        )
    return NuSolution(
        nu=nu, image_angles=formula, residual=np.abs(r), iterations=iterations, theta=theta
    )


def nu_jacobian(frame: TriangleFrame, omega, theta: float, solution: NuSolution | None = None):
    """Derivatives of the gauged nu differences with respect to omega.

    Returns an (..., 2, 3) array: rows are d(nu_ij - nu_jk) and
    d(nu_ki - nu_jk), columns the three omega slots. Entries are
    cotangents of the image corner angles:

        row p: ( cot a_i,  cot a_k,  -cot a_i - cot a_k )
        row r: ( cot a_i + cot a_j,  -cot a_j,  -cot a_i )
    """
    if solution is None:
        solution = solve_nu(frame, omega, theta)
    ca = 1.0 / np.tan(solution.image_angles)
    ci, cj, ck = ca[..., 0], ca[..., 1], ca[..., 2]
    out = np.empty(solution.image_angles.shape[:-1] + (2, 3), dtype=float)
    out[..., 0, 0] = ci
    out[..., 0, 1] = ck
    out[..., 0, 2] = -ci - ck
    out[..., 1, 0] = ci + cj
    out[..., 1, 1] = -cj
    out[..., 1, 2] = -ci
    return out


# -- corner ratio helpers ----------------------------------------------------


def corner_ratios(w) -> np.ndarray:
    """Ratios tau_s of the two edges meeting each corner.

    tau_i = z_ik / z_ij and cyclic, each in the upper half plane for a
    positively oriented triangle; the product over the corners is -1.
    """
    w = np.asarray(w, dtype=complex)
    return np.stack(
        [-w[..., 2] / w[..., 0], -w[..., 0] / w[..., 1], -w[..., 1] / w[..., 2]],
        axis=-1,
    )


def corner_log_ratios(w) -> np.ndarray:
    """Principal logs of the corner ratios.

    For a positively oriented triangle the imaginary parts are the corner
    angles and sum to pi; the real parts telescope and sum to zero.
    """
    return np.log(corner_ratios(w))


# -- vertex-variable solve ---------------------------------------------------


@dataclass(frozen=True)
class XiSolution:
    xi: np.ndarray  # (..., 3), mean zero per triangle
    residual: np.ndarray
    iterations: int
    theta: float


def solve_xi(
    frame: TriangleFrame,
    u,
    theta: float,
    init=None,
    max_iter: int = NEWTON_MAX_ITER,
) -> XiSolution:
    """Corner rotations closing triangles under per-corner scale factors.

    The deformed edges are

        z_s = w_s exp(e^{i theta} ((u_a + u_b)/2 + i (xi_a + xi_b)/2))

    for the edge s joining corners a and b. Given u per corner, solves for
    xi per corner in the mean-zero gauge, batched over triangles.
    """
    u = np.broadcast_to(np.asarray(u, dtype=float), frame.w.shape)
    rot = np.exp(1j * theta)
    u_edge = 0.5 * (u + np.roll(u, -1, axis=-1))

    if init is None:
        xi = np.zeros(frame.w.shape)
    else:
        xi = np.array(np.broadcast_to(np.asarray(init, dtype=float), frame.w.shape))
        xi = xi - xi.mean(axis=-1, keepdims=True)

    scale = np.max(np.abs(frame.w), axis=-1)
    tol = RES_TOL_FACTOR * scale

    def closing(x):
        x_edge = 0.5 * (x + np.roll(x, -1, axis=-1))
        z = frame.w * np.exp(rot * (u_edge + 1j * x_edge))
        return z, z.sum(axis=-1)

    z, r = closing(xi)
    f = np.abs(r) ** 2
    iterations = 0
    for it in range(max_iter):
        active = np.abs(r) > tol
        if not np.any(active):
            break
        iterations = it + 1
        # Unknowns (xi_0, xi_1), with xi_2 = -xi_0 - xi_1. The derivative
        # of the sum with respect to xi_c is (i e^{i theta}/2) (z_c + z_{c-1}).
        dz = 0.5j * rot * (z + np.roll(z, 1, axis=-1))
        g0 = dz[..., 0] - dz[..., 2]
        g1 = dz[..., 1] - dz[..., 2]
        det = g0.real * g1.imag - g0.imag * g1.real
        bad = np.abs(det) <= 1e-300
        det = np.where(bad, 1.0, det)
        d0 = (-r.real * g1.imag + r.imag * g1.real) / det
        d1 = (-g0.real * r.imag + g0.imag * r.real) / det
        d0 = np.where(bad | ~active, 0.0, d0)
        d1 = np.where(bad | ~active, 0.0, d1)
        if np.any(bad & active):
            _raise_marked(
                Infeasible, "singular Newton system while closing a triangle", bad & active
            )

        lam = np.ones_like(f)
        for _ in range(MAX_HALVINGS):
            trial = xi.copy()
            trial[..., 0] += lam * d0
            trial[..., 1] += lam * d1
            trial[..., 2] -= lam * (d0 + d1)
            zt, rt = closing(trial)
            ft = np.abs(rt) ** 2
            good = (~active) | (ft <= f * (1.0 - ARMIJO_SLOPE * lam)) | (ft <= tol**2)
            if np.all(good):
                break
            lam = np.where(good, lam, 0.5 * lam)
        else:
            zt, rt = closing(trial)
            ft = np.abs(rt) ** 2
            worse = ft > f
            trial[np.broadcast_to(worse[..., None], trial.shape)] = xi[
                np.broadcast_to(worse[..., None], trial.shape)
            ]
        xi = trial
        z, r = closing(xi)
        f = np.abs(r) ** 2

    if np.any(np.abs(r) > tol):
        n_bad = int(np.count_nonzero(np.abs(r) > tol))
        _raise_marked(
            Infeasible,
            f"corner rotation solve did not converge for {n_bad} triangle(s)",
            np.abs(r) > tol,
        )
    return XiSolution(xi=xi, residual=np.abs(r), iterations=iterations, theta=theta)
