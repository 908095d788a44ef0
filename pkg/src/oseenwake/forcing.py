"""Rigid-body lift fields and compactly supported forcing assembly.

A rigid body moving through a viscous fluid drives it through the
boundary velocity eta(t) + omega(t) x x.  This module extends that
boundary data into the fluid as a divergence-free field b supported in
the ball of radius 2 (the lift), and collects the right-hand side the
lift generates once subtracted from the momentum balance.  The forcing
comes out in two equivalent shapes: a pointwise field f and a tensor F
with f = div F, which is the form the volume potentials downstream
prefer.

Everything is closed form except one piece of F: the gradient of the
Newtonian potential of the lift's time derivative.  That integral has
a weak |x - y|^-2 kernel and is evaluated with a quadrature whose
radial variable is centred at the evaluation point, which cancels the
singularity exactly.

`synthetic_g` manufactures small time-periodic forcings with the same
support and decomposition contract, for driving the solver without a
body present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .rigid_motion import RigidMotionSpec

_TWO_PI = 2.0 * math.pi
_E3 = np.array([0.0, 0.0, 1.0])
# matrix with entries eps_{ij3}; contracting its rows with a gradient of a
# radial profile gives the curl of (profile * e3)
_EPS3 = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def _bridge(t):
    """exp(-1/t) for t > 0 (else 0) with derivatives through order 3."""
    t = np.asarray(t, dtype=float)
    # below ~2e-3 the value is under 1e-200; treating it as zero keeps the
    # 1/t powers from overflowing while changing nothing at double precision
    pos = t > 2.0e-3
    s = np.zeros_like(t)
    s1 = np.zeros_like(t)
    s2 = np.zeros_like(t)
    s3 = np.zeros_like(t)
    tp = t[pos]
    e = np.exp(-1.0 / tp)
    it = 1.0 / tp
    s[pos] = e
    s1[pos] = e * it * it
    s2[pos] = e * (it**4 - 2.0 * it**3)
    s3[pos] = e * (it**6 - 6.0 * it**5 + 6.0 * it**4)
    return s, s1, s2, s3


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth radial plateau: 1 up to ``inner``, 0 from ``outer`` onward.

    The transition is u / (u + v) with u, v built from exp(-1/t), so the
    profile is C-infinity and every derivative vanishes at both ends of
    the bridge.  Derivatives through third order are closed form; the
    third is what the Laplacian of the lift field needs.

    Values on the plateau and outside the support are exact (1.0 and
    0.0, not merely close).
    """

    inner: float = 1.0
    outer: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.inner < self.outer) or not math.isfinite(self.outer):
            raise ValueError("cutoff radii must satisfy 0 < inner < outer")

    def _eval(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("radius must be nonnegative")
        d = self.outer - self.inner
        u, u1, u2, u3 = _bridge((self.outer - r) / d)
        v, v1, v2, v3 = _bridge((r - self.inner) / d)
        u1, u2, u3 = -u1 / d, u2 / d**2, -u3 / d**3
        v1, v2, v3 = v1 / d, v2 / d**2, v3 / d**3
        w = u + v
        w1 = u1 + v1
        w2 = u2 + v2
        p = u1 * v - u * v1
        p1 = u2 * v - u * v2
        p2 = u3 * v + u2 * v1 - u1 * v2 - u * v3
        val = u / w
        d1 = p / w**2
        d2 = p1 / w**2 - 2.0 * p * w1 / w**3
        d3 = (p2 / w**2 - 4.0 * p1 * w1 / w**3 - 2.0 * p * w2 / w**3
              + 6.0 * p * w1**2 / w**4)
        return val, d1, d2, d3

    def _pick(self, r, idx):
        out = self._eval(r)[idx]
        return float(out) if np.ndim(r) == 0 else out

    def value(self, r):
        return self._pick(r, 0)

    def d1(self, r):
        return self._pick(r, 1)

    def d2(self, r):
        return self._pick(r, 2)

    def d3(self, r):
        return self._pick(r, 3)


_PROFILE = CutoffProfile()


class LiftDerivatives(NamedTuple):
    value: np.ndarray
    gradient: np.ndarray
    time_derivative: np.ndarray
    laplacian: np.ndarray


def _spin_batch(v):
    """Matrices of w -> v x w, one per row of v; shape (N, 3, 3)."""
    m = np.zeros(v.shape[:-1] + (3, 3))
    m[..., 0, 1] = -v[..., 2]
    m[..., 0, 2] = v[..., 1]
    m[..., 1, 0] = v[..., 2]
    m[..., 1, 2] = -v[..., 0]
    m[..., 2, 0] = -v[..., 1]
    m[..., 2, 1] = v[..., 0]
    return m


def _spin(v):
    return _spin_batch(np.asarray(v, dtype=float))


def _lift_parts(profile, eta, omega, x, full=True):
    """Lift field for one coefficient pair (eta, omega), vectorized in x.

    Returns b or (b, grad b, lap b).  grad has entries [p, i, l] equal to
    the l-derivative of component i at point p.  The same routine serves
    the time derivative of the lift: the field is linear in (eta, omega),
    so evaluating it at (eta', omega') gives d/dt b.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != 3:
        raise ValueError("points must be 3-vectors")
    eta = np.asarray(eta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    val, k1, k2, k3 = profile._eval(r)

    c = eta + np.cross(omega, pts)          # rigid velocity eta + omega x x
    b = val[:, None] * c
    if full:
        grad = val[:, None, None] * _spin(omega)
        lap = np.zeros_like(pts)

    # the cross-gradient terms live only where the profile varies
    m = (k1 != 0.0) | (k2 != 0.0) | (k3 != 0.0)
    if np.any(m):
        xm = pts[m]
        rm = r[m][:, None]
        nm = xm / rm
        cm = c[m]
        a1 = k1[m][:, None]
        A = np.cross(eta, xm) - rm**2 * omega
        u = np.cross(nm, A)
        b[m] += 0.5 * a1 * u
        if full:
            a2 = k2[m][:, None]
            a3 = k3[m][:, None]
            wxn = np.cross(omega, nm)
            wxx = wxn * rm
            # grad(n x A) assembled from d n = (I - nn)/r and
            # dA = spin(eta) - 2 outer(omega, x)
            gu = (-_spin_batch(A) - u[:, :, None] * nm[:, None, :]) / rm[:, :, None]
            gu += _spin_batch(nm) @ _spin(eta)
            gu += 2.0 * wxn[:, :, None] * xm[:, None, :]
            grad[m] += (0.5 * a2[:, :, None] * (u[:, :, None] * nm[:, None, :])
                        + 0.5 * a1[:, :, None] * gu
                        + a1[:, :, None] * (cm[:, :, None] * nm[:, None, :]))
            # radial Laplacian pieces: lap(psi' u)/2 + lap(psi c), using
            # (n.grad)u = eta - (eta.n)n + 2 omega x x and
            # lap u = (4/r)((eta.n)n + omega x x)
            ndir = (nm @ eta)[:, None] * nm
            lap[m] = (0.5 * ((a3 + 2.0 * a2 / rm) * u
                             + 2.0 * a2 * (eta - ndir + 2.0 * wxx)
                             + a1 * (4.0 / rm) * (ndir + wxx))
                      + (a2 + 2.0 * a1 / rm) * cm
                      + 2.0 * a1 * wxn)
    if not full:
        return b
    return b, grad, lap


def lift_field(spec, x, t, derivatives=False):
    """Solenoidal extension of the rigid boundary velocity at time t.

    Equals eta + omega x x on the unit ball, vanishes outside radius 2,
    and is divergence free everywhere.  With ``derivatives=True`` the
    spatial gradient, time derivative, and Laplacian come back too, all
    closed form.

    ``x`` may be one point (shape (3,)) or a batch (N, 3); ``t`` is a
    single time.
    """
    if np.ndim(t) != 0:
        raise ValueError("t must be a single time")
    single = np.asarray(x).ndim == 1
    eta = spec.eta(t)
    omega = spec.omega(t)
    if not derivatives:
        b = _lift_parts(_PROFILE, eta, omega, x, full=False)
        return b[0] if single else b
    b, grad, lap = _lift_parts(_PROFILE, eta, omega, x, full=True)
    bt = _lift_parts(_PROFILE, spec.eta_dot(t), spec.omega_dot(t), x, full=False)
    if single:
        return LiftDerivatives(b[0], grad[0], bt[0], lap[0])
    return LiftDerivatives(b, grad, bt, lap)


# ---------------------------------------------------------------------------
# gradient of the Newtonian potential


def _orth_frame(axis):
    a = np.abs(axis)
    helper = np.zeros(3)
    helper[int(np.argmin(a))] = 1.0
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def _gauss_on(lo, hi, n):
    z, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (z + 1.0), half * w


def _split_edges(lo, hi, breaks):
    edges = [lo]
    for c in breaks:
        if lo + 1.0e-12 * (hi - lo) < c < hi - 1.0e-12 * (hi - lo):
            edges.append(c)
    edges.append(hi)
    return np.array(sorted(edges))


def _panel_nodes(edges, n):
    ns, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nn, ww = _gauss_on(a, b, n)
        ns.append(nn)
        ws.append(ww)
    return np.concatenate(ns), np.concatenate(ws)


def _chord_rule(x, radius, n_mu, n_rho, n_phi, feature_radii):
    """Product rule for integrals of h(y) over the ball, radial from x.

    Returns nodes y, combined weights (the r^2 Jacobian already
    cancelled against the |x - y|^-2 kernel), and the unit directions
    from x to each node.  Rays that miss the support ball are never
    sampled; along each ray the radial panels break exactly where the
    ray crosses the spheres named in ``feature_radii``, so a profile
    with structure on those spheres stays smooth within every panel.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    axis = x / r if r > 0.0 else _E3.copy()
    e1, e2 = _orth_frame(axis)
    feats = sorted(c for c in feature_radii if 0.0 < c <= radius)

    # angles at which a ray from x grazes a feature sphere
    def graze_mu(c):
        return -math.sqrt(max(0.0, 1.0 - (c / r) ** 2)) if 0.0 < c < r else None

    if r < radius:
        breaks = sorted({m for m in (graze_mu(c) for c in feats)
                         if m is not None} | {0.0})
        mu, mu_w = _panel_nodes(_split_edges(-1.0, 1.0, breaks), n_mu)
        chord_lo = np.zeros_like(mu)
        chord_hi = -r * mu + np.sqrt(r * r * mu * mu + radius * radius - r * r)
    else:
        # only the cone toward the ball contributes; substitute
        # mu = -u_c - w^2 so the square-root edge at the cone boundary
        # becomes smooth
        u_c = math.sqrt(max(0.0, 1.0 - (radius / r) ** 2))
        w_hi = math.sqrt(1.0 - u_c)
        breaks = sorted(math.sqrt(-m - u_c) for c in feats
                        for m in (graze_mu(c),)
                        if m is not None and m < -u_c)
        wv, wvw = _panel_nodes(_split_edges(0.0, w_hi, breaks), n_mu)
        mu = -u_c - wv**2
        mu_w = 2.0 * wv * wvw
        half = r * wv * np.sqrt(2.0 * u_c + wv**2)
        chord_lo = -r * mu - half
        chord_hi = -r * mu + half

    phi = _TWO_PI * (np.arange(n_phi) + 0.5) / n_phi
    cphi, sphi = np.cos(phi), np.sin(phi)

    sin_t = np.sqrt(np.clip(1.0 - mu**2, 0.0, None))
    dirs = (sin_t[:, None, None] * cphi[None, :, None] * e1
            + sin_t[:, None, None] * sphi[None, :, None] * e2
            + mu[:, None, None] * axis)            # (n_dir, n_phi, 3)

    ys, ws, ns = [], [], []
    for k, (lo, hi) in enumerate(zip(chord_lo, chord_hi)):
        # ray crossings of each feature sphere: rho^2 + 2 r mu rho = c^2 - r^2
        cross = []
        for c in feats:
            disc = r * r * mu[k] ** 2 + c * c - r * r
            if disc > 0.0:
                rt = math.sqrt(disc)
                cross.extend((-r * mu[k] - rt, -r * mu[k] + rt))
        rho, rho_w = _panel_nodes(_split_edges(lo, hi, sorted(cross)), n_rho)
        y = x + rho[:, None, None] * dirs[k][None, :, :]   # (n_rad, n_phi, 3)
        ys.append(y.reshape(-1, 3))
        ws.append(np.repeat(rho_w * mu_w[k] * (_TWO_PI / n_phi), n_phi))
        ns.append(np.broadcast_to(dirs[k][None], y.shape).reshape(-1, 3))
    return np.concatenate(ys), np.concatenate(ws), np.concatenate(ns)


def _origin_rule(x, radius, n_mu, n_rho, n_phi, feature_radii):
    """Origin-centred product rule for x comfortably outside the ball.

    No singularity to cancel out there, so the plain kernel is
    integrated; radial panels break at the feature spheres.
    """
    x = np.asarray(x, dtype=float)
    axis = x / np.linalg.norm(x)
    e1, e2 = _orth_frame(axis)
    feats = sorted(c for c in feature_radii if 0.0 < c < radius)
    rho, rho_w = _panel_nodes(_split_edges(0.0, radius, feats), n_rho)
    mu, mu_w = _panel_nodes(np.array([-1.0, 0.0, 1.0]), n_mu)
    phi = _TWO_PI * (np.arange(n_phi) + 0.5) / n_phi
    dirs = (np.sqrt(1.0 - mu[:, None, None] ** 2)
            * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2)
            + mu[:, None, None] * axis)
    y = rho[:, None, None, None] * dirs[None]          # (n_rad, n_mu, n_phi, 3)
    wts = (rho_w[:, None, None] * rho[:, None, None] ** 2
           * mu_w[None, :, None] * (_TWO_PI / n_phi))
    wts = np.broadcast_to(wts, y.shape[:3])
    d = x - y
    dist = np.linalg.norm(d, axis=-1)
    kern = d / dist[..., None] ** 3
    return y.reshape(-1, 3), wts.reshape(-1).copy(), -kern.reshape(-1, 3)


def _npg_eval(h, x, radius, n_mu, n_rho, n_phi, feature_radii):
    r = float(np.linalg.norm(np.asarray(x, dtype=float)))
    if r > 1.25 * radius:
        y, wts, dirn = _origin_rule(x, radius, n_mu, n_rho, n_phi, feature_radii)
    else:
        y, wts, dirn = _chord_rule(x, radius, n_mu, n_rho, n_phi, feature_radii)
    vals = np.asarray(h(y), dtype=float)
    if vals.ndim == 1:
        unsigned = wts @ np.abs(vals) / (4.0 * math.pi)
        return -(wts * vals) @ dirn / (4.0 * math.pi), unsigned
    if vals.ndim == 2 and vals.shape[0] == y.shape[0]:
        unsigned = np.max(wts @ np.abs(vals)) / (4.0 * math.pi)
        return (-np.einsum("m,mk,mj->kj", wts, vals, dirn) / (4.0 * math.pi),
                unsigned)
    raise ValueError("profile must map (M, 3) points to (M,) or (M, k) values")


def newtonian_potential_gradient(h, x, support_radius=2.0, *, rtol=2.5e-4,
                                 resolution=1.0, check=True,
                                 feature_radii=None):
    """Gradient of the Newtonian potential of -h, i.e. -grad (G * h)(x)
    with G the 1/(4 pi |x|) kernel.

    ``h`` maps an (M, 3) array of points to (M,) values (or (M, k) for k
    stacked profiles, giving a (k, 3) result) and must vanish outside the
    ball of ``support_radius``.  For a radial h of total mass q and x
    outside the support this is q x / (4 pi |x|^3).

    ``feature_radii`` names spheres on which the profile has structure
    (plateau edges); quadrature panels are aligned with them.  Default:
    half the support radius.

    The quadrature measures its own convergence by comparing two node
    densities; a disagreement beyond ``rtol`` raises RuntimeError rather
    than returning a silently wrong value.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError("x must be one 3-vector")
    if not (support_radius > 0.0 and math.isfinite(support_radius)):
        raise ValueError("support_radius must be positive and finite")
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    if feature_radii is None:
        feature_radii = (0.5 * support_radius,)
    # near-tangent chords (x just outside the support sphere) converge the
    # slowest; densify the rule there
    r_rel = float(np.linalg.norm(x)) / support_radius
    if 0.9 < r_rel < 1.25:
        resolution = 1.4 * resolution

    def counts(scale):
        return (max(4, round(14 * scale)), max(4, round(16 * scale)),
                max(6, round(32 * scale)))

    v1, m1 = _npg_eval(h, x, support_radius, *counts(resolution), feature_radii)
    v2, m2 = _npg_eval(h, x, support_radius, *counts(1.5 * resolution),
                       feature_radii)
    # cancellation can leave a value far below the unsigned integral; the
    # convergence test floors the scale there instead of comparing noise
    scale = max(np.max(np.abs(v1)), np.max(np.abs(v2)), 1.0e-8 * max(m1, m2))
    if scale == 0.0:
        return v2
    if check and np.max(np.abs(v1 - v2)) > rtol * scale:
        raise RuntimeError(
            "Newtonian potential gradient quadrature did not converge at "
            f"x={x.tolist()} (disagreement {np.max(np.abs(v1 - v2)) / scale:.2e} "
            f"relative, rtol {rtol:.1e}); raise `resolution` or smooth the profile")
    return v2


# ---------------------------------------------------------------------------
# forcing assembly


@dataclass(frozen=True)
class ForcingSample:
    """Forcing at one point and time: the field f, the tensor F with
    f = div F, and the Newtonian-potential part F0 of F."""

    f: np.ndarray
    F: np.ndarray
    F0: np.ndarray
    x: np.ndarray
    t: float

    def __post_init__(self):
        for name, shape in (("f", (3,)), ("F", (3, 3)), ("F0", (3, 3)),
                            ("x", (3,))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", float(self.t))


def assemble_forcing(spec, x, t, *, rtol=2.5e-4, resolution=1.0, check=True):
    """Forcing generated by the lift of the rigid motion, at one point.

    f collects the Laplacian, transport, rotation, time-derivative, and
    self-advection of the lift; F is the matching divergence-form tensor.
    Both vanish outside the ball of radius 2.  The quadrature knobs are
    passed through to the Newtonian-potential part of F.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError("x must be one 3-vector")
    if np.ndim(t) != 0:
        raise ValueError("t must be a single time")
    eta = spec.eta(t)
    omega = spec.omega(t)
    b, grad, bt, lap = lift_field(spec, x, t, derivatives=True)
    c = eta + np.cross(omega, x)
    f = lap + grad @ c - np.cross(omega, b) - bt - grad @ b

    eta_d = spec.eta_dot(t)
    omega_d = spec.omega_dot(t)
    if not (np.any(eta_d) or np.any(omega_d)):
        F0 = np.zeros((3, 3))
    else:
        def h(pts):
            return _lift_parts(_PROFILE, eta_d, omega_d, pts, full=False)
        F0 = newtonian_potential_gradient(h, x, support_radius=_PROFILE.outer,
                                          rtol=rtol, resolution=resolution,
                                          check=check,
                                          feature_radii=(_PROFILE.inner,))
    F = (grad + np.outer(b, c) - np.outer(np.cross(omega, x), b)
         - F0 - np.outer(b, b))
    return ForcingSample(f=f, F=F, F0=F0, x=x, t=t)


# ---------------------------------------------------------------------------
# synthetic periodic forcing


@dataclass(frozen=True)
class SyntheticForcing:
    """Time-periodic forcing supported in a ball, with g = div G.

    Two flavours.  ``curl``: g is the curl of a radial plateau times e3,
    so G is closed form (G = envelope * profile * eps_{.,.,3}) and g is
    solenoidal.  ``bump``: g is a radial plateau times e3; its tensor is
    the gradient of a Newtonian potential, evaluated by quadrature, row
    by row.
    """

    kind: str
    amplitude: float
    period: float
    harmonic: int
    support_radius: float
    profile: CutoffProfile

    def envelope(self, t):
        ph = _TWO_PI * self.harmonic * np.asarray(t, dtype=float) / self.period
        return self.amplitude * (1.0 + np.cos(ph))

    def g(self, x, t):
        if np.ndim(t) != 0:
            raise ValueError("t must be a single time")
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        env = float(self.envelope(t))
        if self.kind == "curl":
            slope = self.profile.d1(r)
            safe = np.where(r > 0.0, r, 1.0)
            out = env * slope[:, None] * np.cross(pts / safe[:, None], _E3)
        else:
            out = env * self.profile.value(r)[:, None] * _E3
        return out[0] if np.asarray(x).ndim == 1 else out

    def G(self, x, t):
        if np.ndim(t) != 0:
            raise ValueError("t must be a single time")
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        env = float(self.envelope(t))
        if self.kind == "curl":
            chi = self.profile.value(np.linalg.norm(pts, axis=1))
            out = env * chi[:, None, None] * _EPS3
        else:
            def h(yy):
                return self.profile.value(np.linalg.norm(yy, axis=1))
            out = np.zeros((pts.shape[0], 3, 3))
            for i, p in enumerate(pts):
                out[i, 2] = env * newtonian_potential_gradient(
                    h, p, support_radius=self.support_radius,
                    feature_radii=(self.profile.inner,))
        return out[0] if np.asarray(x).ndim == 1 else out


def synthetic_g(kind="curl", amplitude=1.0, period=1.0, harmonic=1,
                support_radius=2.0):
    """Manufactured periodic forcing for exercising the volume potentials.

    ``support_radius`` scales the profile; it may not exceed 2, the ball
    the rest of the pipeline assumes forcing lives in.
    """
    if kind not in ("curl", "bump"):
        raise ValueError("kind must be 'curl' or 'bump'")
    if not (math.isfinite(amplitude)):
        raise ValueError("amplitude must be finite")
    if not (period > 0.0 and math.isfinite(period)):
        raise ValueError("period must be a positive finite time")
    if int(harmonic) != harmonic or harmonic < 0:
        raise ValueError("harmonic must be a nonnegative integer")
    if not (0.0 < support_radius <= 2.0):
        raise ValueError("support must stay inside the ball of radius 2")
    profile = CutoffProfile(inner=0.5 * support_radius, outer=support_radius)
    return SyntheticForcing(kind=kind, amplitude=float(amplitude),
                            period=float(period), harmonic=int(harmonic),
                            support_radius=float(support_radius),
                            profile=profile)
