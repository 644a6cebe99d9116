import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

import heatmetric as hm
from heatmetric.heat import circle_kernel, sphere_kernel


CIRCLE = hm.CircleGeometry(L=2 * np.pi, n=256)
CIRCLE_SNR = hm.CircleGeometry(L=2.0, n=256)  # strong-signal circle for derivatives
TORUS = hm.TorusGeometry(L1=2 * np.pi, L2=2 * np.pi, n1=32, n2=32)


def circle_gt_closed_form(L, t, v=1.0):
    I = quad(lambda s: 1.0 / circle_kernel(t, L, s), 0, L, limit=500)[0]
    return v**2 * (1 - L**2 / I)


def fd_half_derivative(geom, t, **kw):
    """Centered difference of (1/2) g_t with step t/8 and one Richardson level."""
    dt = t / 8
    f = lambda s: hm.metric_gt(geom, s, **kw)
    fd1 = (f(t + dt) - f(t - dt)) / (2 * dt) / 2
    fd2 = (f(t + dt / 2) - f(t - dt / 2)) / dt / 2
    return (4 * fd2 - fd1) / 3


class TestSolveWeightedPoisson:
    def test_zero_source(self):
        rho = np.ones(CIRCLE.n)
        vp = hm.solve_weighted_poisson(CIRCLE, rho, np.zeros(CIRCLE.n))
        assert np.abs(vp.phi).max() == 0.0

    def test_circle_fourier_mode(self):
        # rho = 1: plain Poisson, phi = -(L/2pi)^2 cos(2 pi y / L)
        L, n = 1.0, 128
        geom = hm.CircleGeometry(L=L, n=n)
        y = geom.nodes()
        eta = np.cos(2 * np.pi * y / L)
        vp = hm.solve_weighted_poisson(geom, np.ones(n), eta)
        expected = -((L / (2 * np.pi)) ** 2) * np.cos(2 * np.pi * y / L)
        assert np.abs(vp.phi - expected).max() < 1e-3
        assert vp.residual <= 1e-8

    def test_linearity_in_source(self):
        rho = circle_kernel(0.3, CIRCLE.L, CIRCLE.nodes())
        eta = circle_kernel(0.3, CIRCLE.L, CIRCLE.nodes(), deriv=1)
        one = hm.solve_weighted_poisson(CIRCLE, rho, eta)
        three = hm.solve_weighted_poisson(CIRCLE, rho, 3.0 * eta)
        assert np.abs(three.phi - 3.0 * one.phi).max() < 1e-10

    def test_zero_mean_gauge(self):
        rho = circle_kernel(0.3, CIRCLE.L, CIRCLE.nodes())
        eta = circle_kernel(0.3, CIRCLE.L, CIRCLE.nodes(), deriv=1)
        vp = hm.solve_weighted_poisson(CIRCLE, rho, eta)
        w = CIRCLE.volume_weights()
        assert abs(vp.phi @ w) <= 1e-10 * np.abs(vp.phi).max() * w.sum()

    def test_nonzero_mean_rejected(self):
        with pytest.raises(hm.NonzeroMeanSource):
            hm.solve_weighted_poisson(CIRCLE, np.ones(CIRCLE.n), np.ones(CIRCLE.n))

    def test_nonpositive_density_rejected(self):
        rho = np.ones(CIRCLE.n)
        rho[3] = 0.0
        with pytest.raises(hm.NonpositiveDensity):
            hm.solve_weighted_poisson(CIRCLE, rho, np.zeros(CIRCLE.n))

    def test_mode_guards(self):
        sph = hm.model_sphere(1.0, 64, 40)
        with pytest.raises(hm.TangentError):
            hm.solve_weighted_poisson(sph, np.ones(64), np.zeros(64), azimuthal_mode=0)
        with pytest.raises(hm.TangentError):
            hm.solve_weighted_poisson(CIRCLE, np.ones(CIRCLE.n), np.zeros(CIRCLE.n),
                                      azimuthal_mode=1)

    def test_energy_gradient_vanishes(self, rng):
        vp = hm.velocity_potential(CIRCLE, 0.2, x=0.0, v=1.0)
        scale = np.linalg.norm(vp.eta)
        for _ in range(5):
            d = rng.normal(size=CIRCLE.n)
            d /= np.linalg.norm(d)
            assert abs(hm.poisson_energy_gradient(vp, d)) <= 1e-8 * scale

    def test_energy_gradient_torus(self, rng):
        vp = hm.velocity_potential(TORUS, 0.3, v=(1.0, -0.5))
        d = rng.normal(size=(TORUS.n1, TORUS.n2))
        d /= np.linalg.norm(d)
        assert abs(hm.poisson_energy_gradient(vp, d)) <= 1e-8 * np.linalg.norm(vp.eta)


class TestVelocityPotential:
    def test_zero_vector(self):
        vp = hm.velocity_potential(CIRCLE, 0.2, x=0.0, v=0.0)
        assert np.abs(vp.phi).max() == 0.0
        assert np.abs(hm.velocity_potential(hm.model_sphere(1.0, 128, 60), 0.2, v=0.0).phi).max() == 0.0

    def test_linearity_in_v(self):
        a = hm.velocity_potential(CIRCLE, 0.2, x=0.0, v=1.0)
        b = hm.velocity_potential(CIRCLE, 0.2, x=0.0, v=-2.5)
        assert np.abs(b.phi + 2.5 * a.phi).max() < 1e-10

    def test_circle_flux_oracle(self):
        # integrate the flux ODE once: phi' = v + C / rho, C = -vL / I_t
        L, t, v = CIRCLE.L, 0.2, 1.0
        I = quad(lambda s: 1.0 / circle_kernel(t, L, s), 0, L, limit=500)[0]
        C = -v * L / I
        for n, tol in ((256, 0.05), (512, 0.025)):
            geom = hm.CircleGeometry(L=L, n=n)
            vp = hm.velocity_potential(geom, t, x=0.0, v=v)
            dphi = (np.roll(vp.phi, -1) - vp.phi) / geom.h
            oracle = v + C / circle_kernel(t, L, geom.faces())
            rel = np.abs((dphi - oracle) / oracle).max()
            assert rel < tol  # first-order at the antipodal density minimum

    def test_sphere_source_sign_via_finite_difference(self):
        # grad_x rho . v against rotating the center: eta = -grad_x rho . v,
        # probed at exact cell centers
        geom = hm.model_sphere(1.0, 256, 100)
        t = 0.15
        vp = hm.velocity_potential(geom, t, v=1.0)
        eps = 1e-5
        for i in (30, 100, 180):
            theta = geom.nodes()[i]
            for psi in (0.0, 1.0, 2.5):
                cosa = lambda e: np.cos(e) * np.cos(theta) + np.sin(e) * np.sin(theta) * np.cos(psi)
                fd = (sphere_kernel(t, np.arccos(cosa(eps)), 1.0, 100)
                      - sphere_kernel(t, np.arccos(cosa(-eps)), 1.0, 100)) / (2 * eps)
                eta_here = vp.eta[i] * np.cos(psi)
                assert abs(fd + eta_here) < 1e-6 * max(abs(fd), 1e-3)

    def test_sphere_pole_gradient_recovers_v(self):
        geom = hm.model_sphere(1.0, 512, 120)
        ups = []
        for t in (0.025, 0.0125):
            u = hm.velocity_potential(geom, t, v=1.0).phi
            ups.append((-3 * u[0] + 4 * u[1] - u[2]) / (2 * geom.h))
        extrapolated = 2 * ups[1] - ups[0]
        assert abs(extrapolated - 1.0) < 0.02

    def test_under_resolved_time(self):
        coarse = hm.CircleGeometry(L=2 * np.pi, n=16)
        with pytest.raises(hm.UnresolvedTime):
            hm.velocity_potential(coarse, 0.05, v=1.0)


class TestMetricGt:
    def test_zero_time_returns_speed(self):
        assert hm.metric_gt(CIRCLE, 0.0, v=3.0) == 9.0
        assert hm.metric_gt(TORUS, 0.0, v=(0.6, 0.8)) == pytest.approx(1.0, abs=1e-15)
        assert hm.metric_gt(hm.model_sphere(1.0, 64, 40), 0.0, v=1.0) == 1.0

    def test_circle_closed_form(self):
        for t in (0.2, 0.3):
            got = hm.metric_gt(CIRCLE, t, x=0.0, v=1.0)
            ref = circle_gt_closed_form(CIRCLE.L, t)
            assert abs(got - ref) / ref < 1e-4

    def test_quadratic_scaling(self):
        g1 = hm.metric_gt(CIRCLE, 0.2, v=1.0)
        g2 = hm.metric_gt(CIRCLE, 0.2, v=2.0)
        assert_allclose(g2, 4 * g1, rtol=1e-12)

    def test_continuity_at_zero(self):
        # g_t -> |v|^2 as t decreases; n = 512 keeps the discrete bias below
        # the limit's approach
        geom = hm.CircleGeometry(L=2 * np.pi, n=512)
        vals = [hm.metric_gt(geom, t, v=1.0) for t in (0.3, 0.2, 0.05)]
        assert abs(vals[0] - 1.0) > abs(vals[-1] - 1.0)
        assert abs(vals[-1] - 1.0) < 1e-6

    def test_translation_invariance(self):
        a = hm.metric_gt(CIRCLE, 0.2, x=0.0, v=1.0)
        b = hm.metric_gt(CIRCLE, 0.2, x=1.3, v=1.0)
        assert abs(a - b) < 1e-10

    def test_torus_separable_matches_circle(self):
        g_t = hm.metric_gt(TORUS, 0.3, v=(1.0, 0.0))
        ref = circle_gt_closed_form(TORUS.L1, 0.3)
        assert abs(g_t - ref) / ref < 1e-3

    def test_polarization_identity(self):
        t = 0.25
        v = np.array([1.0, 0.0])
        w = np.array([0.3, -0.7])
        gvw = hm.metric_gt(TORUS, t, v=v + w)
        gvmw = hm.metric_gt(TORUS, t, v=v - w)
        gv = hm.metric_gt(TORUS, t, v=v)
        gw = hm.metric_gt(TORUS, t, v=w)
        assert abs(gvw + gvmw - 2 * gv - 2 * gw) < 1e-8

    def test_exponential_contraction_bound(self):
        # g_t <= e^{-2Kt} |v|^2 within 1e-6 relative (needs the resolved
        # grid: the coarse-grid bias exceeds the tolerance near t = 0)
        geom = hm.CircleGeometry(L=2 * np.pi, n=512)
        for t in (0.05, 0.1, 0.2):
            assert hm.metric_gt(geom, t, v=1.0) <= 1.0 + 1e-6
        sph = hm.model_sphere(1.0, 512, 120)
        for t in (0.05, 0.1, 0.2):
            assert hm.metric_gt(sph, t, v=1.0) <= np.exp(-2 * t) * (1 + 1e-6)


class TestTangentPlan:
    def test_mass_and_moment_circle(self):
        plan = hm.tangent_plan(CIRCLE, 0.2, x=0.0, v=1.0)
        assert abs(plan.mass() - 1.0) < 1e-8
        assert plan.second_moment() == hm.metric_gt(CIRCLE, 0.2, x=0.0, v=1.0)
        assert np.all(np.isfinite(plan.grad_sq))

    def test_mass_and_moment_sphere(self):
        sph = hm.model_sphere(1.0, 256, 100)
        plan = hm.tangent_plan(sph, 0.1, v=1.0)
        assert abs(plan.mass() - 1.0) < 1e-8
        assert plan.second_moment() == hm.metric_gt(sph, 0.1, v=1.0)

    def test_mass_and_moment_torus(self):
        plan = hm.tangent_plan(TORUS, 0.3, v=(0.6, 0.8))
        assert abs(plan.mass() - 1.0) < 1e-8
        assert plan.second_moment() == hm.metric_gt(TORUS, 0.3, v=(0.6, 0.8))


class TestBochnerDerivative:
    def test_circle_matches_finite_difference(self):
        for t in (0.05, 0.3):
            b = hm.gt_derivative_bochner(CIRCLE_SNR, t, v=1.0)
            fd = fd_half_derivative(CIRCLE_SNR, t, v=1.0)
            assert abs(b - fd) / abs(fd) < 0.01
            assert b <= 0  # flat: -int (phi'')^2 rho

    def test_sphere_matches_and_bounds(self):
        sph = hm.model_sphere(1.0, 512, 120)
        for t in (0.1, 0.2):
            b = hm.gt_derivative_bochner(sph, t, v=1.0)
            fd = fd_half_derivative(sph, t, v=1.0)
            assert abs(b - fd) / abs(fd) < 0.01
            assert b <= -sph.K * hm.metric_gt(sph, t, v=1.0) + 1e-8

    def test_zero_vector(self):
        assert hm.gt_derivative_bochner(CIRCLE_SNR, 0.1, v=0.0) == 0.0

    def test_torus_strictly_negative(self):
        val = hm.gt_derivative_bochner(TORUS, 0.25, v=(1.0, 0.5))
        assert val < 0

    def test_hessian_mass_reported(self):
        sph = hm.model_sphere(1.0, 256, 100)
        vals = [hm.squared_hessian_mass(sph, t, v=1.0) for t in (0.2, 0.1, 0.05)]
        assert np.all(np.isfinite(vals))
        assert np.all(np.array(vals) >= 0)


class TestRicPairing:
    def test_flat_geometries_exactly_zero(self):
        assert hm.ric_pairing(CIRCLE, 0.2, v=1.0) == 0.0
        assert hm.ric_pairing(TORUS, 0.3, v=(1.0, 1.0)) == 0.0

    def test_sphere_equals_gt_over_r_squared(self):
        sph = hm.model_sphere(2.0, 256, 100)
        p = hm.ric_pairing(sph, 0.2, v=1.0)
        g = hm.metric_gt(sph, 0.2, v=1.0)
        assert_allclose(p, g / 4.0, rtol=1e-14)

    def test_small_time_limit_unit_sphere(self):
        sph = hm.model_sphere(1.0, 512, 120)
        p1 = hm.ric_pairing(sph, 0.05, v=1.0)
        p2 = hm.ric_pairing(sph, 0.025, v=1.0)
        assert abs(2 * p2 - p1 - 1.0) < 0.05


class TestMetricSpeed:
    def test_circle_two_percent(self):
        rep = hm.metric_speed_check(CIRCLE, 0.2, 1e-3 * CIRCLE.L)
        assert rep.h_effective == CIRCLE.h
        assert rep.rel_mismatch <= 0.02

    def test_quotient_changes_linearly_in_h(self):
        r1 = hm.metric_speed_check(CIRCLE, 0.2, CIRCLE.h)
        r2 = hm.metric_speed_check(CIRCLE, 0.2, 2 * CIRCLE.h)
        assert abs(r2.w2_quotient_sq - r1.w2_quotient_sq) <= 0.05 * r1.h_effective

    def test_rotation_invariance_of_w2_side(self):
        # both sides are constant along the rotation curve
        t, k = 0.2, 1
        _, space = hm.model_circle(CIRCLE.L, CIRCLE.n)
        y = CIRCLE.nodes()

        def measure(c):
            d = circle_kernel(t, CIRCLE.L, y - c) * CIRCLE.h
            return d / d.sum()

        w_a = hm.w2_exact(measure(0.0), measure(k * CIRCLE.h), space.dist).value
        s0 = 5 * CIRCLE.h
        w_b = hm.w2_exact(measure(s0), measure(s0 + k * CIRCLE.h), space.dist).value
        assert abs(w_a - w_b) < 1e-10

    def test_under_resolved(self):
        coarse = hm.CircleGeometry(L=2 * np.pi, n=16)
        with pytest.raises(hm.UnresolvedTime):
            hm.metric_speed_check(coarse, 0.2, coarse.h)


class TestTangencyExperiment:
    def test_circle_slope_to_zero(self):
        rep = hm.tangency_experiment(CIRCLE, v=1.0, t_grid=[0.2, 0.1, 0.05, 0.025])
        assert abs(rep.extrapolated_slope) < 0.05
        assert rep.passed(tol=0.05)

    def test_torus_slope_to_zero(self):
        geom = hm.TorusGeometry(L1=2 * np.pi, L2=2 * np.pi, n1=64, n2=64)
        rep = hm.tangency_experiment(geom, v=(1.0, 0.0), t_grid=[0.4, 0.2, 0.1])
        assert abs(rep.extrapolated_slope) < 0.05

    def test_sphere_slope_to_minus_two(self):
        sph = hm.model_sphere(1.0, 256, 120)
        rep = hm.tangency_experiment(sph, v=1.0, t_grid=[0.2, 0.1, 0.05, 0.025])
        assert rep.deviation <= 0.05
        assert rep.one_sided_ok
        assert rep.target == -2.0

    def test_grid_validation(self):
        with pytest.raises(hm.TangentError):
            hm.tangency_experiment(CIRCLE, v=1.0, t_grid=[0.2])
        with pytest.raises(hm.TangentError):
            hm.tangency_experiment(CIRCLE, v=1.0, t_grid=[0.2, 0.19, 0.18])

    def test_unresolved_t_min(self):
        sph = hm.model_sphere(1.0, 128, 40)
        with pytest.raises(hm.TruncationError):
            hm.tangency_experiment(sph, v=1.0, t_grid=[0.02, 0.01, 0.005])
