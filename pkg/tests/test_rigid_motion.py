"""Frame transport, drift, and wake-constant checks against closed forms."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from oseenwake import (
    RigidMotionSpec,
    candidate_zeta,
    evolution_matrix,
    wake_constant,
    wake_drift,
)
from oseenwake.rigid_motion import (
    RotationPath,
    _rodrigues,
    _rot_geometric_sum,
    rotation_path,
)

TWO_PI = 2.0 * math.pi


def spin(w):
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


@pytest.fixture(scope="module")
def spec_const():
    # constant omega, generic direction
    w = np.array([0.3, -1.1, 2.0])
    return RigidMotionSpec(period=1.0, omega_coeffs=[(0, w, (0, 0, 0))])


@pytest.fixture(scope="module")
def spec_generic():
    # non-commuting omega(t): mixes two directions and two harmonics
    return RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (0.4, 0.0, 1.0), (0, 0, 0)),
                    (1, (0.0, 0.7, 0.0), (0.2, 0.0, 0.0))],
        omega_coeffs=[(0, (0.0, 0.0, 1.5), (0, 0, 0)),
                      (1, (1.0, 0.0, 0.0), (0.0, 0.5, 0.0)),
                      (2, (0.0, 0.3, 0.0), (0.0, 0.0, 0.4))],
    )


def test_constant_omega_matches_matrix_exponential(spec_const):
    w = spec_const.omega(0.0)
    for (t, s) in [(0.7, 0.2), (1.9, -0.4), (5.0, 0.0), (0.2, 0.7)]:
        got = evolution_matrix(spec_const, t, s).matrix
        want = expm(-(t - s) * spin(w))
        assert np.max(np.abs(got - want)) < 1e-10


def test_orthogonality_and_determinant(spec_generic):
    rng = np.random.default_rng(7)
    for _ in range(25):
        s, dt = rng.uniform(-2, 2), rng.uniform(-3, 3)
        P = evolution_matrix(spec_generic, s + dt, s).matrix
        assert np.max(np.abs(P.T @ P - np.eye(3))) < 1e-10
        assert abs(np.linalg.det(P) - 1.0) < 1e-10


def test_cocycle(spec_generic):
    rng = np.random.default_rng(11)
    for _ in range(12):
        r, s, t = np.sort(rng.uniform(-2, 4, size=3))
        A = evolution_matrix(spec_generic, t, s).matrix
        B = evolution_matrix(spec_generic, s, r).matrix
        C = evolution_matrix(spec_generic, t, r).matrix
        assert np.max(np.abs(A @ B - C)) < 1e-8


def test_periodicity(spec_generic):
    l = spec_generic.period
    for (t, s) in [(0.8, 0.1), (2.3, 1.9), (1.1, -0.6)]:
        P1 = evolution_matrix(spec_generic, t, s).matrix
        P2 = evolution_matrix(spec_generic, t + l, s + l).matrix
        assert np.max(np.abs(P1 - P2)) < 1e-9


def test_inverse_is_transpose(spec_generic):
    A = evolution_matrix(spec_generic, 1.7, 0.3).matrix
    B = evolution_matrix(spec_generic, 0.3, 1.7).matrix
    assert np.max(np.abs(A @ B - np.eye(3))) < 1e-9


def test_fixed_axis_is_preserved():
    e = np.array([1.0, 2.0, -2.0]) / 3.0
    spec = RigidMotionSpec(
        period=1.0,
        omega_coeffs=[(1, 2.0 * e, (0, 0, 0)), (2, (0, 0, 0), -0.7 * e)],
    )
    for (t, s) in [(0.9, 0.0), (3.4, 1.2)]:
        P = evolution_matrix(spec, t, s).matrix
        assert np.max(np.abs(P @ e - e)) < 1e-10


def test_self_convergence(spec_generic):
    # halving the step changes the projected answer by far less than 1e-10
    P = evolution_matrix(spec_generic, 1.3, 0.2).matrix
    fine = RotationPath(spec_generic)
    n = spec_generic.substeps_per_period()
    from oseenwake.rigid_motion import _polar_orthonormalize, _rk4_phi
    ks, cw, sw = spec_generic._omega_packed
    P2 = _polar_orthonormalize(
        _rk4_phi(0.2, 1.3, 4 * n, spec_generic.period, ks, cw, sw))
    assert np.max(np.abs(P - P2)) < 1e-10
    assert fine.n == n


def test_drift_translation_only_closed_form():
    eps = 0.37
    spec = RigidMotionSpec(
        period=1.0, eta_coeffs=[(1, (eps, 0.0, 0.0), (0, 0, 0))])
    for (s, t) in [(0.0, 0.6), (0.25, 2.1), (-0.3, 0.4)]:
        got = wake_drift(spec, s, t, np.zeros(3))
        want = np.array([(eps / TWO_PI)
                         * (math.sin(TWO_PI * t) - math.sin(TWO_PI * s)),
                         0.0, 0.0])
        assert np.max(np.abs(got - want)) < 5e-10


def test_drift_subtracts_zeta_linearly(spec_generic):
    z1 = np.array([0.1, -0.2, 0.5])
    d0 = wake_drift(spec_generic, 0.2, 1.7, np.zeros(3))
    d1 = wake_drift(spec_generic, 0.2, 1.7, z1)
    assert np.max(np.abs(d1 - (d0 - 1.5 * z1))) < 1e-12


def test_drift_composition_with_fixed_axis():
    # omega along e3 and zeta along e3: Phi(t,s) zeta = zeta, so
    # drift(r,t) = Phi(t,s) drift(r,s) + drift(s,t)
    spec = RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (0.0, 0.0, 1.0), (0, 0, 0)),
                    (1, (0.5, 0.0, 0.0), (0, 0, 0))],
        omega_coeffs=[(1, (0, 0, 0), (0.0, 0.0, TWO_PI))],
    )
    zeta = np.array([0.0, 0.0, 1.0])
    r, s, t = 0.1, 0.9, 2.3
    lhs = wake_drift(spec, r, t, zeta)
    P = evolution_matrix(spec, t, s).matrix
    rhs = P @ wake_drift(spec, r, s, zeta) + wake_drift(spec, s, t, zeta)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_drift_self_convergence(spec_generic):
    from oseenwake.rigid_motion import _polar_orthonormalize, _rk4_drift
    z = np.array([0.05, 0.0, 0.95])
    got = wake_drift(spec_generic, 0.3, 4.1, z)
    ks, cw, sw = spec_generic._omega_packed
    ke, ce, se = spec_generic._eta_packed
    P, J = _rk4_drift(0.3, 4.1, 16384, 1.0, ks, cw, sw, ke, ce, se)
    want = _polar_orthonormalize(P) @ J - (4.1 - 0.3) * z
    assert np.max(np.abs(got - want)) < 1e-10


def test_rotation_geometric_sum_matches_bruteforce():
    rng = np.random.default_rng(3)
    e = rng.normal(size=3)
    e /= np.linalg.norm(e)
    v = rng.normal(size=3)
    for ang in (0.7, -1.3, 1e-16, math.pi):
        for k in (0, 1, 2, 7, 40, -5):
            want = sum((_rodrigues(e, j * ang) @ v
                        for j in range(k)), np.zeros(3)) if k >= 0 else \
                -sum((_rodrigues(e, j * ang) @ v
                      for j in range(k, 0)), np.zeros(3))
            got = _rot_geometric_sum(e, ang, k, v)
            assert np.max(np.abs(got - want)) < 1e-11 * max(1, abs(k))


def test_path_reduction_far_times(spec_generic):
    # monodromy-power route equals direct integration at t = 7.3 periods
    path = rotation_path(spec_generic)
    t = 7.3
    direct = evolution_matrix(spec_generic, t, 0.0).matrix
    assert np.max(np.abs(path.phi0(t) - direct)) < 1e-8
    from oseenwake.rigid_motion import _rk4_drift
    ks, cw, sw = spec_generic._omega_packed
    ke, ce, se = spec_generic._eta_packed
    _, J = _rk4_drift(0.0, t, 1 << 15, 1.0, ks, cw, sw, ke, ce, se)
    assert np.max(np.abs(path.cumulative(t) - J)) < 1e-8
    # negative times exercise the k<0 branch of the monodromy reduction:
    # Phi(u,0)^T = Phi(0,-T)  Phi(u,-T)^T for u in [-T,0], so
    # C(-T) = -Phi(0,-T) int_{-T}^0 Phi(u,-T)^T eta du
    P2, J2 = _rk4_drift(-2.6, 0.0, 1 << 14, 1.0, ks, cw, sw, ke, ce, se)
    want = -(P2 @ J2)
    assert np.max(np.abs(path.cumulative(-2.6) - want)) < 1e-8


def test_candidate_zeta_translation_only():
    spec = RigidMotionSpec(
        period=2.0,
        eta_coeffs=[(0, (0.2, 0.0, 1.0), (0, 0, 0)),
                    (3, (0.0, 0.9, 0.0), (0.1, 0, 0))])
    z = candidate_zeta(spec)
    assert np.allclose(z, [0.2, 0.0, 1.0], atol=1e-12)


def test_candidate_zeta_parallel_pair():
    e = np.array([0.0, 0.6, 0.8])
    spec = RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, 0.5 * e, (0, 0, 0)), (1, 0.3 * e, (0, 0, 0))],
        omega_coeffs=[(0, 2.0 * e, (0, 0, 0)), (2, (0, 0, 0), 1.1 * e)])
    z = candidate_zeta(spec)
    assert z is not None
    assert np.max(np.abs(z - 0.5 * e)) < 1e-12


def test_candidate_zeta_zero_mean_rotation_vs_quadrature():
    # omega = 2 pi sin(2 pi t) e3, eta = e1.  The transported velocity is
    # (cos th, sin th, 0) with th(t) = 1 - cos(2 pi t); its period mean is
    # the candidate.  Oracle: scipy adaptive quadrature, frozen here.
    spec = RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (1.0, 0.0, 0.0), (0, 0, 0))],
        omega_coeffs=[(1, (0, 0, 0), (0.0, 0.0, TWO_PI))])
    th = lambda t: 1.0 - math.cos(TWO_PI * t)
    zx, _ = quad(lambda t: math.cos(th(t)), 0, 1, epsabs=1e-13)
    zy, _ = quad(lambda t: math.sin(th(t)), 0, 1, epsabs=1e-13)
    # independent closed form: angle-average of cos/sin(1 - cos u) reduces
    # to the Bessel integral, giving cos(1) J0(1) and sin(1) J0(1)
    from scipy.special import j0
    assert abs(zx - math.cos(1.0) * j0(1.0)) < 1e-12
    assert abs(zy - math.sin(1.0) * j0(1.0)) < 1e-12
    z = candidate_zeta(spec)
    assert z is not None
    assert np.max(np.abs(z - np.array([zx, zy, 0.0]))) < 1e-8


def test_candidate_zeta_declines_generic_motion(spec_generic):
    assert candidate_zeta(spec_generic) is None


def test_wake_constant_admissible_translation():
    spec = RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (0.0, 0.0, 1.0), (0, 0, 0)),
                    (1, (0.3, 0.0, 0.0), (0, 0, 0))])
    z = candidate_zeta(spec)
    rep = wake_constant(spec, z)
    assert rep.bounded
    assert rep.parallel_ok
    assert rep.M_estimate < 0.2
    assert rep.growth_ratio <= 1.5


def test_wake_constant_flags_wrong_zeta():
    spec = RigidMotionSpec(
        period=1.0, eta_coeffs=[(0, (0.0, 0.0, 1.0), (0, 0, 0))])
    bad = np.array([0.0, 0.0, 0.7])
    rep = wake_constant(spec, bad, window=(0.0, 32.0))
    assert not rep.bounded
    assert rep.growth_ratio > 1.5


def test_wake_constant_parallel_flag():
    spec = RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (0.0, 0.0, 1.0), (0, 0, 0))],
        omega_coeffs=[(0, (1.0, 0.0, 0.0), (0, 0, 0))])
    # omega along e1, zeta along e3: transport spoils the wake direction
    rep = wake_constant(spec, np.array([0.0, 0.0, 1.0]), window=(0.0, 4.0))
    assert not rep.parallel_ok


def test_wake_report_json_roundtrip():
    spec = RigidMotionSpec(
        period=1.0, eta_coeffs=[(0, (0.0, 0.0, 1.0), (0, 0, 0))])
    rep = wake_constant(spec, candidate_zeta(spec), window=(0.0, 4.0))
    d = rep.to_json_dict()
    assert set(d) == {"zeta", "M", "parallel_ok", "window",
                      "growth_ratio", "samples"}
    assert d["samples"] and {"s", "t", "drift"} <= set(d["samples"][0])


def test_spec_validation():
    with pytest.raises(ValueError):
        RigidMotionSpec(period=-1.0)
    with pytest.raises(ValueError):
        RigidMotionSpec(period=1.0, eta_coeffs=[(0, (1, 0), (0, 0))])
    with pytest.raises(ValueError):
        RigidMotionSpec(period=1.0,
                        eta_coeffs=[(1, (1, 0, 0), (0, 0, 0)),
                                    (1, (0, 1, 0), (0, 0, 0))])


def test_amplitude_includes_derivatives():
    spec = RigidMotionSpec(
        period=1.0, eta_coeffs=[(2, (1.0, 0.0, 0.0), (0, 0, 0))])
    # |eta| peaks at 1 but |eta'| peaks at 4 pi
    assert abs(spec.amplitude - 4.0 * math.pi) < 1e-9
