"""Time-periodic rigid motion of the body and its frame transport.

The body moves with translational velocity eta(t) and angular velocity
omega(t), both l-periodic trigonometric polynomials.  The frame transport
is the orthogonal solution Phi(t,s) of

    d/dt Phi(t,s) = -[omega(t)]_x Phi(t,s),    Phi(s,s) = I,

which satisfies the cocycle identity Phi(t,s)Phi(s,r) = Phi(t,r) and the
periodicity Phi(t+l, s+l) = Phi(t,s).  The wake-admissibility question for
a candidate wake velocity zeta is whether

    M = sup_{s<t} | int_s^t { Phi(t,tau) eta(tau) - zeta } dtau |

is finite; this module estimates M over a finite window and computes the
candidate zeta in the cases where one exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

_TWO_PI = 2.0 * math.pi

# Substeps per period for the one-step integrator.  l/512 keeps the global
# 4th-order error near 1e-9 for |omega| ~ 2*pi, well under the 1e-8 budget.
_BASE_SUBSTEPS = 512


# ---------------------------------------------------------------------------
# Fourier data plumbing

def _pack_coeffs(coeffs):
    """Normalize [(k, cos3, sin3), ...] into (ks, cos, sin) float arrays."""
    if not coeffs:
        return (np.zeros(0, dtype=np.int64),
                np.zeros((0, 3)), np.zeros((0, 3)))
    ks = np.array([int(k) for k, _, _ in coeffs], dtype=np.int64)
    c = np.array([np.asarray(cv, dtype=float) for _, cv, _ in coeffs])
    s = np.array([np.asarray(sv, dtype=float) for _, _, sv in coeffs])
    if c.shape != (len(ks), 3) or s.shape != (len(ks), 3):
        raise ValueError("coefficients must be 3-vectors")
    if np.any(ks < 0):
        raise ValueError("frequency indices must be >= 0")
    if len(set(ks.tolist())) != len(ks):
        raise ValueError("duplicate frequency index")
    return ks, c, s


def _coeffs_tuple(coeffs):
    out = []
    for k, cv, sv in coeffs:
        out.append((int(k),
                    tuple(float(x) for x in cv),
                    tuple(float(x) for x in sv)))
    return tuple(out)


@njit(cache=True)
def _trig_eval(t, l, ks, cv, sv, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    for i in range(ks.shape[0]):
        ph = _TWO_PI * ks[i] * t / l
        cph = math.cos(ph)
        sph = math.sin(ph)
        for a in range(3):
            out[a] += cv[i, a] * cph + sv[i, a] * sph


@njit(cache=True)
def _trig_eval_dot(t, l, ks, cv, sv, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    for i in range(ks.shape[0]):
        w = _TWO_PI * ks[i] / l
        ph = w * t
        cph = math.cos(ph)
        sph = math.sin(ph)
        for a in range(3):
            out[a] += w * (-cv[i, a] * sph + sv[i, a] * cph)


# ---------------------------------------------------------------------------
# Core integrator (RK4 on the matrix ODE, plus the transported-eta integral)

@njit(cache=True)
def _rk4_phi(s, t, n, l, ks, cw, sw):
    """Integrate Phi(t,s) with n RK4 substeps.  Returns the raw 3x3 matrix."""
    h = (t - s) / n
    P = np.eye(3)
    w = np.empty(3)
    K1 = np.empty((3, 3))
    K2 = np.empty((3, 3))
    K3 = np.empty((3, 3))
    K4 = np.empty((3, 3))
    for step in range(n):
        tau = s + step * h
        _trig_eval(tau, l, ks, cw, sw, w)
        _spin_mul(w, P, K1)
        _trig_eval(tau + 0.5 * h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K1, 0.5 * h, K2)
        _spin_mul_acc(w, P, K2, 0.5 * h, K3)
        _trig_eval(tau + h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K3, h, K4)
        for i in range(3):
            for j in range(3):
                P[i, j] += (h / 6.0) * (K1[i, j] + 2.0 * K2[i, j]
                                        + 2.0 * K3[i, j] + K4[i, j])
    return P


@njit(cache=True)
def _spin_mul(w, P, out):
    # out = -[w]_x P, i.e. out_row_i = -(w x P_row-wise by columns)
    for j in range(3):
        out[0, j] = -(w[1] * P[2, j] - w[2] * P[1, j])
        out[1, j] = -(w[2] * P[0, j] - w[0] * P[2, j])
        out[2, j] = -(w[0] * P[1, j] - w[1] * P[0, j])


@njit(cache=True)
def _spin_mul_acc(w, P, K, a, out):
    # out = -[w]_x (P + a K)
    for j in range(3):
        p0 = P[0, j] + a * K[0, j]
        p1 = P[1, j] + a * K[1, j]
        p2 = P[2, j] + a * K[2, j]
        out[0, j] = -(w[1] * p2 - w[2] * p1)
        out[1, j] = -(w[2] * p0 - w[0] * p2)
        out[2, j] = -(w[0] * p1 - w[1] * p0)


@njit(cache=True)
def _rk4_path(l, n, ks, cw, sw, ke, ce, se):
    """March Phi(tau,0) over one period on n substeps (n even).

    Returns (phis, integrand) where phis[j] = Phi(tau_j, 0) raw RK4 and
    integrand[j] = Phi(tau_j,0)^T eta(tau_j), for tau_j = j*l/n, j=0..n.
    """
    h = l / n
    phis = np.empty((n + 1, 3, 3))
    integrand = np.empty((n + 1, 3))
    P = np.eye(3)
    w = np.empty(3)
    e = np.empty(3)
    K1 = np.empty((3, 3))
    K2 = np.empty((3, 3))
    K3 = np.empty((3, 3))
    K4 = np.empty((3, 3))
    for j in range(n + 1):
        tau = j * h
        for i in range(3):
            for m in range(3):
                phis[j, i, m] = P[i, m]
        _trig_eval(tau, l, ke, ce, se, e)
        for i in range(3):
            integrand[j, i] = (P[0, i] * e[0] + P[1, i] * e[1]
                               + P[2, i] * e[2])
        if j == n:
            break
        _trig_eval(tau, l, ks, cw, sw, w)
        _spin_mul(w, P, K1)
        _trig_eval(tau + 0.5 * h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K1, 0.5 * h, K2)
        _spin_mul_acc(w, P, K2, 0.5 * h, K3)
        _trig_eval(tau + h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K3, h, K4)
        for i in range(3):
            for m in range(3):
                P[i, m] += (h / 6.0) * (K1[i, m] + 2.0 * K2[i, m]
                                        + 2.0 * K3[i, m] + K4[i, m])
    return phis, integrand


@njit(cache=True)
def _rk4_drift(s, t, n, l, ks, cw, sw, ke, ce, se):
    """Phi(t,s) and J = int_s^t Phi(tau,s)^T eta(tau) dtau in one sweep.

    n is even; the integral uses composite Simpson on the substep nodes so
    its error matches the RK4 order.
    """
    h = (t - s) / n
    P = np.eye(3)
    w = np.empty(3)
    e = np.empty(3)
    f = np.empty((n + 1, 3))
    K1 = np.empty((3, 3))
    K2 = np.empty((3, 3))
    K3 = np.empty((3, 3))
    K4 = np.empty((3, 3))
    for j in range(n + 1):
        tau = s + j * h
        _trig_eval(tau, l, ke, ce, se, e)
        for i in range(3):
            f[j, i] = P[0, i] * e[0] + P[1, i] * e[1] + P[2, i] * e[2]
        if j == n:
            break
        _trig_eval(tau, l, ks, cw, sw, w)
        _spin_mul(w, P, K1)
        _trig_eval(tau + 0.5 * h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K1, 0.5 * h, K2)
        _spin_mul_acc(w, P, K2, 0.5 * h, K3)
        _trig_eval(tau + h, l, ks, cw, sw, w)
        _spin_mul_acc(w, P, K3, h, K4)
        for i in range(3):
            for m in range(3):
                P[i, m] += (h / 6.0) * (K1[i, m] + 2.0 * K2[i, m]
                                        + 2.0 * K3[i, m] + K4[i, m])
    J = np.zeros(3)
    for j in range(0, n - 1, 2):
        for i in range(3):
            J[i] += (h / 3.0) * (f[j, i] + 4.0 * f[j + 1, i] + f[j + 2, i])
    return P, J


def _polar_orthonormalize(P):
    """Nearest rotation matrix (polar factor) of a near-rotation P."""
    U, _, Vt = np.linalg.svd(P)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:  # never hit for near-rotations, kept as a guard
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


# ---------------------------------------------------------------------------
# Public types

@dataclass(frozen=True)
class RigidMotionSpec:
    """Period l and truncated Fourier series of eta(t) and omega(t).

    Coefficients are tuples (k, cos_vec, sin_vec) meaning the term
    cos_vec*cos(2 pi k t/l) + sin_vec*sin(2 pi k t/l).  The trigonometric
    form gives exact periodicity and exact time derivatives.

    amplitude is the sup over t of max(|eta|, |omega|, |eta'|, |omega'|).
    """

    period: float
    eta_coeffs: tuple = ()
    omega_coeffs: tuple = ()
    amplitude: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError("period must be a positive finite time")
        object.__setattr__(self, "eta_coeffs", _coeffs_tuple(self.eta_coeffs))
        object.__setattr__(self, "omega_coeffs",
                           _coeffs_tuple(self.omega_coeffs))
        object.__setattr__(self, "_eta_packed", _pack_coeffs(self.eta_coeffs))
        object.__setattr__(self, "_omega_packed",
                           _pack_coeffs(self.omega_coeffs))
        object.__setattr__(self, "amplitude", self._sup_amplitude())
        tt = np.linspace(0.0, self.period, 4097)
        v = self.omega(tt)
        object.__setattr__(self, "_omega_sup",
                           math.sqrt(_refined_max(tt, np.sum(v * v, axis=1))))

    # -- evaluation (vectorized over t) --
    def eta(self, t):
        return self._eval(self._eta_packed, t, dot=False)

    def omega(self, t):
        return self._eval(self._omega_packed, t, dot=False)

    def eta_dot(self, t):
        return self._eval(self._eta_packed, t, dot=True)

    def omega_dot(self, t):
        return self._eval(self._omega_packed, t, dot=True)

    def _eval(self, packed, t, dot):
        ks, c, s = packed
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        ph = _TWO_PI * np.outer(tt, ks) / self.period
        if dot:
            w = _TWO_PI * ks / self.period
            out = (-np.sin(ph) * w) @ c + (np.cos(ph) * w) @ s
        else:
            out = np.cos(ph) @ c + np.sin(ph) @ s
        return out[0] if scalar else out

    def _sup_amplitude(self):
        # Grid max refined by parabolic interpolation; exact to ~1e-12 for
        # trigonometric polynomials, comfortably within the 1e-8 contract.
        tt = np.linspace(0.0, self.period, 4097)
        sup = 0.0
        for vals in (self.eta(tt), self.omega(tt),
                     self.eta_dot(tt), self.omega_dot(tt)):
            mag2 = np.sum(vals * vals, axis=1)
            sup = max(sup, math.sqrt(_refined_max(tt, mag2)))
        return sup

    @property
    def omega_sup(self):
        return self._omega_sup

    @property
    def eta_mean(self):
        """(1/l) int_0^l eta dt, exact from the constant Fourier term."""
        for k, cv, _ in self.eta_coeffs:
            if k == 0:
                return np.asarray(cv, dtype=float)
        return np.zeros(3)

    @property
    def omega_mean(self):
        for k, cv, _ in self.omega_coeffs:
            if k == 0:
                return np.asarray(cv, dtype=float)
        return np.zeros(3)

    def substeps_per_period(self):
        # Finer than l/256; scale with amplitude so the h^4 error stays put.
        scale = max(1.0, self.omega_sup * self.period / _TWO_PI)
        n = int(_BASE_SUBSTEPS * math.ceil(scale))
        return n + (n % 2)


def _refined_max(tt, vals):
    j = int(np.argmax(vals))
    if j == 0 or j == len(tt) - 1:
        # periodic data: endpoints carry the same value, interior refine only
        j = max(1, min(len(tt) - 2, j))
    f0, f1, f2 = vals[j - 1], vals[j], vals[j + 1]
    denom = f0 - 2.0 * f1 + f2
    if denom >= 0:
        return float(f1)
    delta = 0.5 * (f0 - f2) / denom
    return float(f1 - 0.25 * (f0 - f2) * delta)


@dataclass(frozen=True)
class RotationMatrix:
    """Orthogonal frame transport Phi(t,s) with its time pair."""

    matrix: np.ndarray
    t: float
    s: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class WakeReport:
    """Finite-window estimate of the wake constant M for a candidate zeta."""

    zeta: np.ndarray
    M_estimate: float
    drift_samples: tuple        # ((s, t), drift 3-vector) pairs
    parallel_ok: bool
    window: tuple               # (0, W) relative gap range searched
    growth_ratio: float         # sup over gaps in [W/2, W] / sup in [0, W/2]

    @property
    def bounded(self):
        return self.growth_ratio <= 1.5

    def to_json_dict(self):
        return {
            "zeta": [float(z) for z in self.zeta],
            "M": float(self.M_estimate),
            "parallel_ok": bool(self.parallel_ok),
            "window": [float(w) for w in self.window],
            "growth_ratio": float(self.growth_ratio),
            "samples": [
                {"s": float(s), "t": float(t),
                 "drift": [float(d) for d in dv]}
                for (s, t), dv in self.drift_samples
            ],
        }


# ---------------------------------------------------------------------------
# RotationPath: one-period tabulation plus monodromy algebra

class RotationPath:
    """Read-only cache of Phi(tau,0) and int_0^tau Phi^T eta over one period.

    Arbitrary times reduce to the base period through the monodromy
    Q = Phi(l,0):  Phi(tau + k l, 0) = Phi(tau,0) Q^k, and the cumulative
    integral C(tau) = int_0^tau Phi(u,0)^T eta(u) du extends by the
    geometric rotation sum  C(k l + sigma) = (sum_j (Q^T)^j) C(l)
    + (Q^T)^k C(sigma).  All members are immutable after construction.
    """

    def __init__(self, spec: RigidMotionSpec):
        self.spec = spec
        l = spec.period
        n = spec.substeps_per_period()
        ks, cw, sw = spec._omega_packed
        ke, ce, se = spec._eta_packed
        phis_raw, integrand = _rk4_path(l, n, ks, cw, sw, ke, ce, se)
        phis = np.empty_like(phis_raw)
        for j in range(n + 1):
            phis[j] = _polar_orthonormalize(phis_raw[j])
        self.n = n
        self.h = l / n
        self.phis = phis
        self.ctab = _cumulative_simpson(integrand, self.h)
        self.monodromy = phis[n]
        self.mono_axis, self.mono_angle = _axis_angle(self.monodromy)
        for arr in (self.phis, self.ctab):
            arr.setflags(write=False)

    # -- base-period lookups (grid nodes plus a partial RK4 step) --
    def _phi_base(self, sigma):
        l = self.spec.period
        j = int(math.floor(sigma / self.h + 1e-12))
        j = min(max(j, 0), self.n)
        rem = sigma - j * self.h
        P = self.phis[j]
        if abs(rem) > 1e-13 * max(1.0, l):
            ks, cw, sw = self.spec._omega_packed
            ke, ce, se = self.spec._eta_packed
            dP, _ = _rk4_drift(j * self.h, sigma, 2, l,
                               ks, cw, sw, ke, ce, se)
            P = _polar_orthonormalize(dP @ P)
        return P

    def _ctab_base(self, sigma):
        j = int(math.floor(sigma / self.h + 1e-12))
        j = min(max(j, 0), self.n)
        rem = sigma - j * self.h
        C = self.ctab[j].copy()
        if abs(rem) > 1e-13 * max(1.0, self.spec.period):
            ks, cw, sw = self.spec._omega_packed
            ke, ce, se = self.spec._eta_packed
            _, dJ = _rk4_drift(j * self.h, sigma, 2, self.spec.period,
                               ks, cw, sw, ke, ce, se)
            # dJ is int Phi(u, jh)^T eta; rebase: Phi(u,0) = Phi(u,jh) Phi(jh,0)
            C += self.phis[j].T @ dJ
        return C

    def phi0(self, t):
        """Phi(t, 0) for any real t."""
        l = self.spec.period
        k = math.floor(t / l)
        sigma = t - k * l
        P = self._phi_base(sigma)
        if k == 0:
            return P
        return P @ _rot_power(self.mono_axis, self.mono_angle, k)

    def cumulative(self, t):
        """C(t) = int_0^t Phi(u,0)^T eta(u) du for any real t."""
        l = self.spec.period
        k = math.floor(t / l)
        sigma = t - k * l
        Cl = self.ctab[self.n]
        axis, ang = self.mono_axis, -self.mono_angle  # Q^T rotates by -angle
        out = _rot_geometric_sum(axis, ang, k, Cl)
        out += _rot_power(axis, ang, k) @ self._ctab_base(sigma)
        return out

    def phi(self, t, s):
        """Phi(t, s) = Phi(t,0) Phi(s,0)^T."""
        return self.phi0(t) @ self.phi0(s).T

    def drift(self, s, t, zeta):
        """int_s^t {Phi(t,tau) eta(tau) - zeta} dtau via the cumulative table."""
        zeta = np.asarray(zeta, dtype=float)
        return (self.phi0(t) @ (self.cumulative(t) - self.cumulative(s))
                - (t - s) * zeta)


def _cumulative_simpson(f, h):
    """Cumulative integral of samples f[j] on a uniform grid, O(h^4).

    Even nodes by composite Simpson; odd nodes by the half-panel rule
    int_{x0}^{x1} = h/12 (5 f0 + 8 f1 - f2).
    """
    n = f.shape[0] - 1
    out = np.zeros_like(f)
    for j in range(0, n - 1, 2):
        panel = (h / 3.0) * (f[j] + 4.0 * f[j + 1] + f[j + 2])
        half = (h / 12.0) * (5.0 * f[j] + 8.0 * f[j + 1] - f[j + 2])
        out[j + 1] = out[j] + half
        out[j + 2] = out[j] + panel
    return out


def _axis_angle(Q):
    """Axis and angle of a rotation matrix (angle in (-pi, pi])."""
    w = np.array([Q[2, 1] - Q[1, 2], Q[0, 2] - Q[2, 0], Q[1, 0] - Q[0, 1]])
    sin2 = 0.5 * np.linalg.norm(w)
    cos_ = 0.5 * (np.trace(Q) - 1.0)
    angle = math.atan2(sin2, cos_)
    if sin2 > 1e-12:
        axis = w / (2.0 * sin2)
    elif cos_ > 0:
        axis = np.array([0.0, 0.0, 1.0])    # identity: axis irrelevant
    else:
        # angle pi: axis from the symmetric part
        B = 0.5 * (Q + np.eye(3))
        j = int(np.argmax(np.diag(B)))
        axis = B[:, j] / math.sqrt(max(B[j, j], 1e-300))
    return axis, angle


def _rot_power(axis, angle, k):
    """Rotation matrix for angle k*angle about axis (k any integer)."""
    th = math.fmod(k * angle, _TWO_PI)
    return _rodrigues(axis, th)


def _rodrigues(axis, th):
    e = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -e[2], e[1]],
                  [e[2], 0.0, -e[0]],
                  [-e[1], e[0], 0.0]])
    return np.eye(3) + math.sin(th) * K + (1.0 - math.cos(th)) * (K @ K)


def _rot_geometric_sum(axis, angle, k, v):
    """sum_{j=0}^{k-1} R(j*angle, axis) v, exact closed form.

    Supports negative k through sum_{j=k}^{-1} = -R(k*angle) sum_{j=0}^{-k-1}
    with angle unchanged.
    """
    v = np.asarray(v, dtype=float)
    if k == 0:
        return np.zeros(3)
    if k < 0:
        s = _rot_geometric_sum(axis, angle, -k, v)
        return -_rot_power(axis, angle, k) @ s
    e = np.asarray(axis, dtype=float)
    v_par = np.dot(v, e) * e
    w = v - v_par
    half = 0.5 * angle
    sh = math.sin(half)
    if abs(sh) < 1e-14:
        return k * v
    # sum cos(j a) = sin(k a/2) cos((k-1) a/2) / sin(a/2), likewise for sin
    ck = math.sin(k * half) * math.cos((k - 1) * half) / sh
    sk = math.sin(k * half) * math.sin((k - 1) * half) / sh
    return k * v_par + ck * w + sk * np.cross(e, w)


@lru_cache(maxsize=32)
def _cached_path(spec: RigidMotionSpec):
    return RotationPath(spec)


def rotation_path(spec: RigidMotionSpec) -> RotationPath:
    """Shared per-spec cache of the one-period tabulation."""
    return _cached_path(spec)


# ---------------------------------------------------------------------------
# Operations

def evolution_matrix(spec: RigidMotionSpec, t, s) -> RotationMatrix:
    """Frame transport Phi(t,s), orthogonality-projected.

    Integrates the matrix ODE with classical RK4 on substeps no longer than
    l/512 and projects onto SO(3) through the polar decomposition.
    """
    t = float(t)
    s = float(s)
    if not (math.isfinite(t) and math.isfinite(s)):
        raise ValueError("times must be finite")
    if t == s or not spec.omega_coeffs:
        return RotationMatrix(np.eye(3), t, s)
    l = spec.period
    n_per = spec.substeps_per_period()
    n = max(2, int(math.ceil(abs(t - s) / l * n_per)))
    n += n % 2
    ks, cw, sw = spec._omega_packed
    P = _rk4_phi(s, t, n, l, ks, cw, sw)
    return RotationMatrix(_polar_orthonormalize(P), t, s)


def wake_drift(spec: RigidMotionSpec, s, t, zeta) -> np.ndarray:
    """int_s^t { Phi(t,tau) eta(tau) - zeta } dtau.

    Marches Phi(tau,s) once across [s,t], accumulating
    J = int Phi(tau,s)^T eta(tau) dtau by composite Simpson on the same
    substeps, and returns Phi(t,s) J - (t-s) zeta.
    """
    s = float(s)
    t = float(t)
    if s > t:
        raise ValueError("require s <= t")
    zeta = np.asarray(zeta, dtype=float)
    if t == s:
        return np.zeros(3)
    l = spec.period
    n_per = spec.substeps_per_period()
    n = max(4, int(math.ceil((t - s) / l * n_per)))
    n += n % 2
    ks, cw, sw = spec._omega_packed
    ke, ce, se = spec._eta_packed
    P, J = _rk4_drift(s, t, n, l, ks, cw, sw, ke, ce, se)
    return _polar_orthonormalize(P) @ J - (t - s) * zeta


def wake_constant(spec: RigidMotionSpec, zeta, window=None,
                  n_s: int = 32, per_period: int = 16) -> WakeReport:
    """Finite-window estimate of M = sup |drift| plus a growth diagnostic.

    By l-periodicity of the drift in (s,t) -> (s+l,t+l) the search space is
    s in [0,l) times the gap t-s in [0, W].  The growth diagnostic compares
    the sup over gaps in [W/2, W] against [0, W/2]; a ratio above 1.5 flags
    unbounded drift.  This is a numerical diagnosis, not a proof: the sup
    need not be attained on any finite window.
    """
    l = spec.period
    if window is None:
        window = (0.0, 16.0 * l)
    lo, hi = (0.0, float(window)) if np.isscalar(window) else \
        (float(window[0]), float(window[1]))
    W = hi - lo
    if not (W >= 2.0 * l):
        raise ValueError("window length must be at least 2 periods")
    zeta = np.asarray(zeta, dtype=float)
    path = rotation_path(spec)

    s_vals = np.arange(n_s) * (l / n_s)
    n_gap = max(8, int(round(per_period * W / l)))
    gaps = lo + (np.arange(n_gap + 1) / n_gap) * W

    # drift(s, s+gap) = Phi(s+gap,0) (C(s+gap) - C(s)) - gap*zeta
    sup_lo = 0.0
    sup_hi = 0.0
    best = (0.0, 0.0, np.zeros(3))
    samples = []
    keep = max(1, (n_s * (n_gap + 1)) // 64)
    count = 0
    for s0 in s_vals:
        Cs = path.cumulative(s0)
        for gap in gaps:
            if gap <= 0.0:
                continue
            t1 = s0 + gap
            d = path.phi0(t1) @ (path.cumulative(t1) - Cs) - gap * zeta
            nd = float(np.linalg.norm(d))
            if gap <= lo + 0.5 * W:
                sup_lo = max(sup_lo, nd)
            if gap >= lo + 0.5 * W:
                sup_hi = max(sup_hi, nd)
            if nd > best[0]:
                best = (nd, 0.0, d)
                best_st = (s0, t1)
            if count % keep == 0:
                samples.append(((float(s0), float(t1)), d.copy()))
            count += 1
    M = max(sup_lo, sup_hi)
    if best[0] > 0.0:
        samples.append(((float(best_st[0]), float(best_st[1])),
                        best[2].copy()))
    growth = sup_hi / sup_lo if sup_lo > 0 else \
        (1.0 if sup_hi == 0.0 else math.inf)

    # omega parallel to zeta, or zeta = 0, is the second admissibility leg
    nz = np.linalg.norm(zeta)
    if nz == 0.0:
        par_ok = True
    else:
        tt = np.linspace(0.0, l, 512, endpoint=False)
        om = spec.omega(tt)
        cross = np.cross(om, zeta / nz)
        sup_om = spec.omega_sup
        par_ok = bool(np.max(np.linalg.norm(cross, axis=1))
                      <= 1e-8 * max(1.0, nz) * max(sup_om, 1e-300)) \
            if sup_om > 0 else True
    return WakeReport(zeta=zeta, M_estimate=float(M),
                      drift_samples=tuple(samples), parallel_ok=par_ok,
                      window=(lo, hi), growth_ratio=float(growth))


def candidate_zeta(spec: RigidMotionSpec):
    """The wake velocity zeta in the cases where a formula exists.

    Cases, detected numerically: omega identically zero, or (eta, omega)
    parallel to one constant direction, give zeta = (1/l) int eta dt (the
    transport fixes eta).  A trivial monodromy Phi(l,0) = I makes
    Phi(.,0)^T eta l-periodic and gives zeta = (1/l) int Phi(t,0)^T eta dt.
    Anything else returns None: no candidate, not a guess.
    """
    l = spec.period
    tt = np.linspace(0.0, l, 512, endpoint=False)
    om = spec.omega(tt)
    et = spec.eta(tt)
    om_sup = float(np.max(np.linalg.norm(om, axis=1)))
    et_sup = float(np.max(np.linalg.norm(et, axis=1)))
    scale = max(om_sup, et_sup, 1e-300)

    if et_sup <= 1e-14 * max(om_sup, 1.0):
        return np.zeros(3)             # no translation, drift vanishes
    if om_sup <= 1e-12 * scale:
        return spec.eta_mean

    # common fixed direction for eta and omega
    j = int(np.argmax(np.linalg.norm(om, axis=1)))
    e = om[j] / np.linalg.norm(om[j])
    fixed = (np.max(np.linalg.norm(np.cross(om, e), axis=1))
             <= 1e-10 * scale)
    if fixed:
        if et_sup <= 1e-12 * scale:
            return spec.eta_mean       # eta vanishes; transport is moot
        if (np.max(np.linalg.norm(np.cross(et, e), axis=1))
                <= 1e-10 * scale):
            return spec.eta_mean
    path = rotation_path(spec)
    if np.linalg.norm(path.monodromy - np.eye(3)) <= 1e-8:
        return path.cumulative(l) / l
    return None
