import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import least_squares

from conftest import equilateral_pair_mesh, random_flower_mesh
from thetaconf import errors
from thetaconf.geom import corner_angles
from thetaconf.trisolve import (
    TriangleFrame,
    corner_log_ratios,
    corner_ratios,
    deformed_edges,
    image_angles,
    measured_image_angles,
    nu_jacobian,
    solve_nu,
    solve_xi,
)

THETAS = (0.0, np.pi / 6, np.pi / 3, np.pi / 2)


def random_frames(rng, n, min_angle=0.5):
    """Batch of random positively oriented triangles with sane angles."""
    tris = []
    while len(tris) < n:
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        w = np.array([z[1] - z[0], z[2] - z[1], z[0] - z[2]])
        area2 = (np.conj(z[1] - z[0]) * (z[2] - z[0])).imag
        if area2 <= 0:
            continue
        ang = [np.angle(-w[(s + 2) % 3] / w[s]) for s in range(3)]
        if min(ang) > min_angle:
            tris.append(z)
    return TriangleFrame.from_corners(np.array(tris))


def test_frame_from_mesh_matches_corner_angles():
    m = equilateral_pair_mesh()
    fr = TriangleFrame.from_mesh(m)
    assert_allclose(fr.angles, corner_angles(m), atol=1e-14)
    assert_allclose(fr.w.sum(axis=-1), 0.0, atol=1e-14)


def test_frame_rejects_open_chain():
    with pytest.raises(errors.ValidationError):
        TriangleFrame(w=np.array([1.0, 1.0j, -1.0 - 0.5j]), angles=np.zeros(3))


def test_corner_ratio_invariants():
    rng = np.random.default_rng(0)
    fr = random_frames(rng, 40)
    tau = corner_ratios(fr.w)
    assert_allclose(np.prod(tau, axis=-1), -1.0, rtol=1e-12)
    logs = corner_log_ratios(fr.w)
    # Imaginary parts are the corner angles; real parts telescope.
    assert_allclose(logs.imag, fr.angles, atol=1e-12)
    assert_allclose(logs.imag.sum(axis=-1), np.pi, atol=1e-12)
    assert_allclose(logs.real.sum(axis=-1), 0.0, atol=1e-12)


class TestSolveNu:
    def test_constant_omega_is_rotation(self):
        rng = np.random.default_rng(1)
        fr = random_frames(rng, 10)
        for theta in THETAS:
            sol = solve_nu(fr, np.full(fr.w.shape, 0.3), theta)
            assert_allclose(sol.nu, 0.0, atol=1e-9)
            assert_allclose(sol.image_angles, fr.angles, atol=1e-9)

    def test_closing_and_branch(self):
        rng = np.random.default_rng(2)
        fr = random_frames(rng, 50)
        for theta in THETAS:
            omega = rng.uniform(-0.12, 0.12, size=fr.w.shape)
            sol = solve_nu(fr, omega, theta)
            z = deformed_edges(fr, omega, sol.nu, theta)
            scale = np.max(np.abs(z), axis=-1)
            assert np.all(np.abs(z.sum(axis=-1)) <= 1e-10 * scale)
            assert_allclose(
                sol.image_angles, measured_image_angles(fr, omega, sol.nu, theta), atol=1e-9
            )
            assert_allclose(sol.image_angles.sum(axis=-1), np.pi, atol=1e-9)

    def test_against_generic_least_squares(self):
        # Independent route: drop the closed-form Newton and minimize the
        # raw closing defect with a black-box solver.
        rng = np.random.default_rng(3)
        fr = random_frames(rng, 6)
        for theta in (0.0, np.pi / 5, np.pi / 2):
            omega = rng.uniform(-0.2, 0.2, size=fr.w.shape)
            sol = solve_nu(fr, omega, theta)
            rot = np.exp(1j * theta)
            for t in range(6):
                w = fr.w[t]
                om = omega[t]

                def defect(x):
                    nu = np.array([x[0], 0.0, x[1]])
                    r = np.sum(w * np.exp(rot * (1j * om + nu)))
                    return [r.real, r.imag]

                ref = least_squares(defect, [0.0, 0.0], method="lm", xtol=1e-15)
                assert ref.cost < 1e-16
                assert_allclose(sol.nu[t, [0, 2]], ref.x, atol=5e-8)

    def test_theta_pi2_side_lengths_oracle(self):
        # At theta = pi/2 the omegas prescribe the image side lengths
        # outright, so the image angles follow from the law of cosines.
        rng = np.random.default_rng(4)
        fr = random_frames(rng, 25)
        omega = rng.uniform(-0.2, 0.2, size=fr.w.shape)
        sol = solve_nu(fr, omega, np.pi / 2)
        lengths = np.abs(fr.w) * np.exp(-omega)

        def angle_from_sides(opp, s1, s2):
            return np.arccos((s1**2 + s2**2 - opp**2) / (2 * s1 * s2))

        a_i = angle_from_sides(lengths[:, 1], lengths[:, 0], lengths[:, 2])
        a_j = angle_from_sides(lengths[:, 2], lengths[:, 1], lengths[:, 0])
        a_k = angle_from_sides(lengths[:, 0], lengths[:, 2], lengths[:, 1])
        assert_allclose(sol.image_angles, np.stack([a_i, a_j, a_k], axis=1), atol=1e-9)

    def test_infeasible_lengths(self):
        # Image side lengths violating the triangle inequality cannot close.
        fr = TriangleFrame.from_corners(
            np.array([[0.0, 1.0, 0.5 + 0.8j]])
        )
        omega = np.array([[-3.0, 1.0, 1.0]])  # one side blown up, two shrunk
        with pytest.raises((errors.Infeasible, errors.DegenerateImage)):
            solve_nu(fr, omega, np.pi / 2)

    def test_reflected_branch_rejected(self):
        # Initializing at the reflected closing (a clockwise image) must not
        # be silently accepted.
        fr = TriangleFrame.from_corners(np.array([[0.0, 1.0, 0.3 + 0.9j]]))
        w = fr.w[0]
        flip = np.array([-2 * np.angle(ws) for ws in w])
        flip = flip - flip[1]
        with pytest.raises((errors.Infeasible, errors.DegenerateImage)):
            solve_nu(fr, np.zeros((1, 3)), np.pi / 2, init=flip[None, :])

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        fr = random_frames(rng, 8)
        h = 1e-6
        for theta in THETAS:
            omega = rng.uniform(-0.15, 0.15, size=fr.w.shape)
            sol = solve_nu(fr, omega, theta)
            jac = nu_jacobian(fr, omega, theta, solution=sol)
            fd = np.empty_like(jac)
            for col in range(3):
                up = omega.copy()
                up[:, col] += h
                dn = omega.copy()
                dn[:, col] -= h
                su = solve_nu(fr, up, theta, init=sol.nu)
                sd = solve_nu(fr, dn, theta, init=sol.nu)
                dp = (su.nu[:, 0] - su.nu[:, 1]) - (sd.nu[:, 0] - sd.nu[:, 1])
                dr = (su.nu[:, 2] - su.nu[:, 1]) - (sd.nu[:, 2] - sd.nu[:, 1])
                fd[:, 0, col] = dp / (2 * h)
                fd[:, 1, col] = dr / (2 * h)
            assert_allclose(jac, fd, atol=5e-6)


class TestSolveXi:
    def test_constant_u_scales(self):
        rng = np.random.default_rng(6)
        fr = random_frames(rng, 10)
        for theta in THETAS:
            sol = solve_xi(fr, np.full(fr.w.shape, 0.2), theta)
            assert_allclose(sol.xi, 0.0, atol=1e-9)
            assert_allclose(sol.xi.mean(axis=-1), 0.0, atol=1e-12)

    def test_closing(self):
        rng = np.random.default_rng(7)
        fr = random_frames(rng, 30)
        rot = np.exp(1j * np.pi / 4)
        u = rng.uniform(-0.2, 0.2, size=fr.w.shape)
        sol = solve_xi(fr, u, np.pi / 4)
        u_edge = 0.5 * (u + np.roll(u, -1, axis=-1))
        x_edge = 0.5 * (sol.xi + np.roll(sol.xi, -1, axis=-1))
        z = fr.w * np.exp(rot * (u_edge + 1j * x_edge))
        scale = np.max(np.abs(z), axis=-1)
        assert np.all(np.abs(z.sum(axis=-1)) <= 1e-10 * scale)
        assert_allclose(sol.xi.mean(axis=-1), 0.0, atol=1e-12)

    def test_cot_identity(self):
        # The mixed sensitivities across one corner agree and equal half
        # the cotangent of the angle at that corner.
        rng = np.random.default_rng(8)
        fr = random_frames(rng, 12)
        h = 1e-6
        theta = 0.0

        def half_diff(u, a, b):
            sol = solve_xi(fr, u, theta)
            return 0.5 * (sol.xi[:, a] - sol.xi[:, b])

        base = np.zeros(fr.w.shape)
        up = base.copy()
        up[:, 2] += h
        dn = base.copy()
        dn[:, 2] -= h
        d32 = (half_diff(up, 2, 1) - half_diff(dn, 2, 1)) / (2 * h)
        up = base.copy()
        up[:, 0] += h
        dn = base.copy()
        dn[:, 0] -= h
        d21 = (half_diff(up, 1, 0) - half_diff(dn, 1, 0)) / (2 * h)
        assert_allclose(d32, d21, atol=1e-6)
        assert_allclose(d32, 0.5 / np.tan(fr.angles[:, 1]), atol=1e-6)


def test_image_angle_formula_all_thetas():
    # One more guard on the angle bookkeeping: measure against the formula
    # over a spread of thetas and omegas on a fixed scalene triangle.
    fr = TriangleFrame.from_corners(np.array([[0.0, 2.0, 0.4 + 1.1j]]))
    rng = np.random.default_rng(9)
    for theta in np.linspace(0.0, np.pi / 2, 7):
        omega = rng.uniform(-0.15, 0.15, size=(1, 3))
        sol = solve_nu(fr, omega, theta)
        assert_allclose(
            sol.image_angles, measured_image_angles(fr, omega, sol.nu, theta), atol=1e-9
        )
