"""Wake decay inequality checks against independent quadrature oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from oseenwake.oseen_bounds import (
    BoundCheckResult,
    _auxi1_lhs,
    _auxi2_lhs,
    _deu2_lhs,
    _I2_closed,
    _I32_closed,
    check_auxi1,
    check_auxi2,
    check_deu2,
    check_deu_ineq,
    deuring_F,
    int_y_identity,
    oseen_time_integral,
)


def brute_time_integral(x, zeta, p):
    x = np.asarray(x, float)
    zeta = np.asarray(zeta, float)

    def f(s):
        d = x + zeta * s
        return (np.dot(d, d) + s) ** -p

    T = 10.0 * max(1.0, np.dot(x, x), np.linalg.norm(x),
                   np.linalg.norm(x) / max(np.linalg.norm(zeta), 1e-9))
    a, _ = quad(f, 0, T, limit=400, epsrel=1e-11, epsabs=0.0)
    b, _ = quad(f, T, np.inf, limit=400, epsrel=1e-11, epsabs=1e-18)
    return a + b


class TestOseenTimeIntegral:
    def test_zero_stream_is_inverse_square(self):
        for r in (0.3, 1.0, 7.0, 250.0):
            x = np.array([0.2, -0.7, 0.4]) * r / np.linalg.norm(
                [0.2, -0.7, 0.4])
            got = oseen_time_integral(x, np.zeros(3))
            assert abs(got - r ** -2) <= 1e-8 * r ** -2
            closed = oseen_time_integral(x, np.zeros(3), method="closed")
            assert abs(closed - r ** -2) <= 1e-12 * r ** -2

    def test_closed_matches_quadrature(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            x = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 2)
            zeta = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 1)
            ref = oseen_time_integral(x, zeta, method="quad")
            got = oseen_time_integral(x, zeta, method="closed")
            assert abs(got - ref) <= 1e-7 * ref

    def test_degenerate_discriminant_surface(self):
        # x perpendicular to zeta with |x| = 1/(2|zeta|) makes the
        # quadratic's discriminant vanish; the series branch must take over
        for az in (0.25, 1.0, 4.0):
            zeta = np.array([0.0, 0.0, az])
            x = np.array([1.0, 0.0, 0.0]) / (2.0 * az)
            ref = brute_time_integral(x, zeta, 2.0)
            got = oseen_time_integral(x, zeta, method="closed")
            assert abs(got - ref) <= 1e-7 * ref
            for eps in (-3e-3, 3e-3):
                xe = x * (1.0 + eps)
                ref = brute_time_integral(xe, zeta, 2.0)
                got = oseen_time_integral(xe, zeta, method="closed")
                assert abs(got - ref) <= 1e-7 * ref

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            oseen_time_integral(np.zeros(3), np.array([0, 0, 1.0]))
        with pytest.raises(ValueError):
            oseen_time_integral(np.ones(3), np.zeros(3), method="trapz")

    def test_three_halves_power_closed_form(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            x = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 2)
            zeta = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 1)
            ref = brute_time_integral(x, zeta, 1.5)
            got = float(_I32_closed(x[None, :], zeta)[0])
            assert abs(got - ref) <= 1e-8 * ref
        x = np.array([0.0, 3.0, -4.0])
        assert abs(float(_I32_closed(x[None, :], np.zeros(3))[0])
                   - 2.0 / 5.0) < 1e-14

    def test_vectorized_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        zeta = np.array([0.4, -0.1, 0.9])
        zs = rng.normal(size=(30, 3)) * 5.0
        vec = _I2_closed(zs, zeta)
        for z, v in zip(zs, vec):
            assert abs(v - oseen_time_integral(z, zeta, "closed")) \
                <= 1e-13 * v


class TestDeuringProfile:
    ZETA = np.array([0.0, 0.0, 1.0])

    def test_endpoint_values(self):
        x = np.array([0.0, 0.0, 10.0])
        assert deuring_F(x, 0.0, self.ZETA, 2.0) == 5.0
        assert abs(deuring_F(x, 2.5, self.ZETA, 2.0) - 2.5) < 1e-14

    def test_reference_sample(self):
        # x = 10 e3, y = 0, s = 1: LHS = sqrt(122), F = 4, c = 5^{-1/2}
        x = np.array([0.0, 0.0, 10.0])
        F = deuring_F(x, 1.0, self.ZETA, 2.0)
        assert F == 4.0
        c = min(1 / math.sqrt(2), 1 / math.sqrt(1 + 2 * 2.0))
        lhs = math.sqrt(np.dot(x + self.ZETA, x + self.ZETA) + 1.0)
        assert abs(lhs - math.sqrt(122.0)) < 1e-14
        assert c * F <= lhs

    def test_upward_jumps_at_branch_boundaries(self):
        # the profile jumps up by sqrt(2) entering the plateau from below
        # and leaving it above; both one-sided values are pinned here
        x = np.array([6.0, 0.0, 3.0])
        zeta = np.array([0.0, 0.0, 0.5])
        R = 2.0
        ax = np.linalg.norm(x)
        az = 0.5
        Q = ax * (1 + az * ax + np.dot(zeta, x)) / az
        t3 = (ax - R) / az
        t1 = (ax + R) / az
        lo = deuring_F(x, t3, zeta, R)
        hi = deuring_F(x, t3 * (1 + 1e-12), zeta, R)
        assert abs(lo - math.sqrt(Q / 4)) < 1e-9
        assert abs(hi - math.sqrt(Q / 2)) < 1e-9
        lo = deuring_F(x, t1, zeta, R)
        hi = deuring_F(x, t1 * (1 + 1e-12), zeta, R)
        assert abs(lo - math.sqrt(Q / 2)) < 1e-9
        assert abs(hi - math.sqrt(Q)) < 1e-6
        # entering the plateau from the linear descent: positive jump
        t4 = ax / (4 * az)
        jump = deuring_F(x, t4 * (1 + 1e-12), zeta, R) \
            - deuring_F(x, t4, zeta, R)
        assert jump > 0.0

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            deuring_F(np.array([1.0, 0, 0]), 1.0, self.ZETA, 2.0)
        with pytest.raises(ValueError):
            deuring_F(np.array([9.0, 0, 0]), 1.0, np.zeros(3), 2.0)
        with pytest.raises(ValueError):
            deuring_F(np.array([9.0, 0, 0]), -1.0, self.ZETA, 2.0)


class TestDeuIneq:
    def test_no_violations_bulk(self):
        res = check_deu_ineq(zeta=(0, 0, 1.0), R=2.0, n_samples=20_000,
                             seed=5)
        assert isinstance(res, BoundCheckResult)
        assert res.worst_ratio <= 1.0 + 1e-12
        assert res.passed
        assert res.fitted_constant >= 1 / math.sqrt(5) - 1e-12

    def test_other_stream_strengths(self):
        for zeta in ((0.3, 0.0, 0.0), (0.0, 2.0, 1.0)):
            res = check_deu_ineq(zeta=zeta, R=1.5, n_samples=8_000, seed=2)
            assert res.worst_ratio <= 1.0 + 1e-12

    def test_zero_stream_rejected(self):
        with pytest.raises(ValueError):
            check_deu_ineq(zeta=(0.0, 0.0, 0.0))


def deu2_branch_sum(x, zeta, R):
    """Independent antiderivative of F^{-3}: F is linear per branch, so
    each segment contributes (F_hi^{-2} - F_lo^{-2}) / (2 |zeta| slope)."""
    x = np.asarray(x, float)
    zeta = np.asarray(zeta, float)
    az = np.linalg.norm(zeta)
    ax = np.linalg.norm(x)
    Q = ax * (1 + az * ax + np.dot(zeta, x)) / az
    t4 = ax / (4 * az)
    F4_hi = 0.5 * ax - az * t4          # = ax/4
    piece4 = (F4_hi ** -2 - (0.5 * ax) ** -2) / (2 * az)
    F3_lo = ax - R - az * t4 + math.sqrt(Q / 4)
    piece3 = ((Q / 4) ** -1 - F3_lo ** -2) / (2 * az)
    piece2 = (2 * R / az) * (Q / 2) ** -1.5
    piece1 = (Q ** -1) / (2 * az)
    return piece4 + piece3 + piece2 + piece1


class TestDeu2:
    def test_quadrature_matches_antiderivative(self):
        zeta = np.array([0.0, 0.0, 0.7])
        for d in (np.array([0, 0, 1.0]), np.array([0, 0, -1.0]),
                  np.array([1.0, 0, 0])):
            for r in (5.0, 40.0, 600.0):
                x = r * d
                got = _deu2_lhs(x, zeta, 2.0)
                ref = deu2_branch_sum(x, zeta, 2.0)
                assert abs(got - ref) <= 1e-8 * ref

    def test_sweep_bounded_and_stable(self):
        res = check_deu2(zeta=(0, 0, 1.0), R=2.0, n_per_ray=7)
        assert res.passed
        assert math.isfinite(res.worst_ratio)
        assert res.stability < 0.05
        assert all(row[3] > 0 for row in res.rows)

    def test_zero_stream_rejected(self):
        with pytest.raises(ValueError):
            check_deu2(zeta=(0.0, 0.0, 0.0))


class TestIntYIdentity:
    def test_alpha_two_constant_is_pi_squared(self):
        # C_2 = pi^{3/2} Gamma(1/2) / Gamma(2) = pi^2
        from scipy.special import gamma
        c2 = math.pi ** 1.5 * gamma(0.5) / gamma(2.0)
        assert abs(c2 - math.pi ** 2) < 1e-12
        assert abs(int_y_identity(2.0, 1.0) - 1.0) < 1e-6

    def test_scaling_invariance(self):
        vals = [int_y_identity(2.5, s) for s in (0.04, 1.0, 7.3, 400.0)]
        for v in vals:
            assert abs(v - 1.0) < 1e-6

    def test_higher_power(self):
        assert abs(int_y_identity(3.0, 0.37) - 1.0) < 1e-6

    def test_validation(self):
        with pytest.raises(ValueError):
            int_y_identity(1.5, 1.0)
        with pytest.raises(ValueError):
            int_y_identity(2.0, 0.0)


def auxi1_zero_stream_oracle(ax):
    """For zeta = 0 the spherical average of |x-y|^{-2} is the classical
    log kernel, collapsing the triple integral to one dimension."""
    def f(rho):
        return rho / (1 + rho) ** 2 * math.log((ax + rho) / abs(ax - rho))

    a, _ = quad(f, 0, ax, limit=400, points=[ax * 0.999],
                epsrel=1e-10, epsabs=0.0)
    b, _ = quad(f, ax, 60 * ax + 60, limit=400, epsrel=1e-10, epsabs=0.0)
    c, _ = quad(f, 60 * ax + 60, np.inf, limit=400, epsrel=1e-9,
                epsabs=1e-16)
    return 2 * math.pi / ax * (a + b + c)


class TestAuxi1:
    def test_zero_stream_origin_value(self):
        # zeta = 0, x = 0: the integral collapses to 4 pi exactly
        got = _auxi1_lhs(np.zeros(3), np.zeros(3), lvl=1)
        assert abs(got - 4 * math.pi) < 1e-4 * 4 * math.pi

    def test_zero_stream_matches_log_kernel_reduction(self):
        for ax in (2.0, 5.0, 20.0):
            ref = auxi1_zero_stream_oracle(ax)
            got = _auxi1_lhs(np.array([0.0, ax, 0.0]), np.zeros(3), lvl=1)
            assert abs(got - ref) <= 1e-2 * ref

    def test_quadrature_level_convergence(self):
        zeta = np.array([0.0, 0.0, 1.0])
        for x in (np.array([0, 0, 10.0]), np.array([0, 0, -10.0]),
                  np.array([10.0, 0, 0])):
            v1 = _auxi1_lhs(x, zeta, lvl=1)
            v2 = _auxi1_lhs(x, zeta, lvl=2)
            assert abs(v1 - v2) <= 0.05 * abs(v2)

    def test_sweep_zero_stream(self):
        res = check_auxi1(zeta=(0.0, 0.0, 0.0), n_per_ray=4)
        assert res.passed
        assert math.isfinite(res.worst_ratio)

    def test_sweep_unit_stream(self):
        res = check_auxi1(zeta=(0.0, 0.0, 1.0), n_per_ray=4)
        assert res.passed
        assert res.stability < 0.05


class TestAuxi2:
    R = 2.0

    @staticmethod
    def bump_mass(R):
        m, _ = quad(lambda r: r * r * (1 - (r / R) ** 2) ** 2, 0, R,
                    epsrel=1e-12)
        return 4 * math.pi * m

    def test_zero_stream_shell_theorem(self):
        # radial source, zeta = 0: the y-integral is a Newtonian potential,
        # equal to 2 M / |x| outside the support
        M = self.bump_mass(self.R)
        for ax in (8.0, 30.0):
            x = np.array([ax, 0.0, 0.0])
            got = _auxi2_lhs(x, np.zeros(3), self.R,
                             lambda r: (1 - np.clip(r / self.R, 0, 1)
                                        ** 2) ** 2, lvl=1)
            assert abs(got - 2 * M / ax) <= 1e-6 * (2 * M / ax)

    def test_zero_stream_interior_point(self):
        R = self.R

        def profile(r):
            return (1 - np.clip(r / R, 0, 1) ** 2) ** 2

        ax = 1.0
        inner, _ = quad(lambda r: r * r * profile(r), 0, ax, epsrel=1e-12)
        outer, _ = quad(lambda r: r * profile(r), ax, R, epsrel=1e-12)
        ref = 2 * 4 * math.pi * (inner / ax + outer)
        got = _auxi2_lhs(np.array([0, ax, 0.0]), np.zeros(3), R, profile,
                         lvl=2)
        assert abs(got - ref) <= 2e-3 * ref

    def test_zero_stream_asymptotic_constant(self):
        res = check_auxi2(q=2.0, R=self.R, zeta=(0.0, 0.0, 0.0),
                          n_per_ray=4)
        assert res.passed
        M = self.bump_mass(self.R)
        nrm, _ = quad(lambda r: r * r * (1 - (r / self.R) ** 2) ** 4,
                      0, self.R, epsrel=1e-12)
        g_norm = (4 * math.pi * nrm) ** 0.5
        far = [row for row in res.rows if row[3] > 0]
        tail_ratio = far[-1][3]
        assert abs(tail_ratio - 2 * M / g_norm) <= 0.03 * 2 * M / g_norm

    def test_sweep_unit_stream(self):
        res = check_auxi2(q=2.0, R=self.R, zeta=(0.0, 0.0, 1.0),
                          n_per_ray=4)
        assert res.passed
        assert math.isfinite(res.worst_ratio)

    def test_subcritical_exponent_rejected(self):
        with pytest.raises(ValueError):
            check_auxi2(q=1.5)
        with pytest.raises(ValueError):
            check_auxi2(q=1.2)

    def test_result_serialization(self):
        res = check_deu_ineq(n_samples=2_000, seed=1)
        d = res.to_json_dict()
        assert set(d) == {"name", "samples", "worst_ratio",
                          "fitted_constant", "passed", "stability"}
        assert d["name"] == "deu-ineq"
