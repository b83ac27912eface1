"""Reference divergence-free flows and curve advection.

Model flows are built from closed-form stream functions ``Psi(t, x)`` with
velocity ``X = (-d2 Psi, d1 Psi)``, so ``div X = 0`` identically.  Three
generators are available:

``translation``
    Rigid motion by a constant vector inside a rectangle around the sweep
    of the curve, cut off smoothly outside it.
``radial_morph``
    Area-preserving deformation of one star-shaped curve into another
    about a common center.  Material points keep their normalized radius
    ``rho / R(theta, t)`` and their enclosed sector area, which makes the
    motion incompressible and the interface follow ``R(theta, t)``.
``composite``
    Translation on ``[0, 1/2]`` followed by a morph on ``[1/2, 1]``.

:func:`advect` integrates the flow map of any velocity field with RK4.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (AreaMismatch, CurveLeftDomain, CurveNotInDomain,
                     HomotopyClassMismatch, InvalidCurve, NotStarShaped, OutOfRange,
                     ScenarioMismatch, SelfIntersection, SweepLeavesDomain)
from .geometry import (MAX_SPACING_RATIO, JordanCurve, _resample_closed, _segments_intersect,
                       _shoelace, enclosed_holes, hausdorff_distance, parametric_distance)

log = logging.getLogger(__name__)

TRANSLATION = "translation"
RADIAL_MORPH = "radial_morph"
COMPOSITE = "composite"
SCENARIOS = (TRANSLATION, RADIAL_MORPH, COMPOSITE)

AREA_RTOL = 1e-3
TRANSITION_FRACTION = 0.5
POSTCHECK_RTOL = 1e-2
FD_STEP = 1e-6
N_MODES_GRID = 256


# smooth cutoffs --------------------------------------------------------------
def smoothstep(u):
    """Quintic C^2 step: 0 for ``u <= 0``, 1 for ``u >= 1``.

    Returns value, first and second derivative.
    """
    u = np.clip(u, 0.0, 1.0)
    v = u * u * u * (u * (6 * u - 15) + 10)
    d1 = 30 * u * u * (u - 1) ** 2
    d2 = 60 * u * (u - 1) * (2 * u - 1)
    return v, d1, d2


def window(x, lo, hi, w_lo, w_hi=None):
    """Plateau ``[lo, hi]`` with quintic ramps of width ``w_lo`` / ``w_hi``.

    ``w_lo = 0`` means no lower ramp (the window is 1 below ``hi``).
    Returns value and derivative in ``x``.
    """
    w_hi = w_lo if w_hi is None else w_hi
    x = np.asarray(x, dtype=float)
    val = np.ones_like(x)
    der = np.zeros_like(x)
    if w_lo > 0:
        v, d, _ = smoothstep((x - (lo - w_lo)) / w_lo)
        m = x < lo
        val[m] = v[m]
        der[m] = d[m] / w_lo
    hi_m = x > hi
    v, d, _ = smoothstep(((hi + w_hi) - x) / w_hi)
    val[hi_m] = v[hi_m]
    der[hi_m] = -d[hi_m] / w_hi
    return val, der


def _as_points(x):
    return np.asarray(x, dtype=float).reshape(-1, 2)


class ModelFlow:
    """Base class: subclasses implement ``stream`` and ``velocity``."""

    kind = "base"

    def stream(self, t, x):
        raise NotImplementedError

    def velocity(self, t, x):
        raise NotImplementedError

    def __call__(self, t, x):
        return self.velocity(t, x)

    def gradient(self, t, x, h=FD_STEP):
        """Central-difference velocity gradient ``G[p, i, j] = d_j X_i``."""
        x = _as_points(x)
        g = np.empty((len(x), 2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            g[:, :, j] = (self.velocity(t, x + e) - self.velocity(t, x - e)) / (2 * h)
        return g

    def in_support(self, t, x):
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError


# translation -----------------------------------------------------------------
class TranslationFlow(ModelFlow):
    """``Psi = chi(x) (v2 (x1 - c1) - v1 (x2 - c2))`` with a product cutoff
    ``chi`` in coordinates along and across the sweep direction.

    Parameters
    ----------
    velocity_vector : (2,) array
        Displacement over unit time.
    center : (2,) array
        Middle of the sweep.
    length : float
        Plateau extent along the motion (``|v| + 2 a``).
    half_width : float
        Plateau half extent across the motion.
    transition : float
        Width of the cutoff ramps.
    direction : (2,) array
        Unit vector along the motion; ignored when ``v = 0``.
    """

    kind = TRANSLATION

    def __init__(self, velocity_vector, center, length, half_width, transition,
                 direction=None):
        self.v = np.asarray(velocity_vector, dtype=float)
        self.c = np.asarray(center, dtype=float)
        speed = float(np.linalg.norm(self.v))
        if direction is None:
            direction = self.v / speed if speed > 0 else np.array([1.0, 0.0])
        self.e_s = np.asarray(direction, dtype=float)
        self.e_n = np.array([-self.e_s[1], self.e_s[0]])
        self.length = float(length)
        self.half_width = float(half_width)
        self.transition = float(transition)

    def _local(self, x):
        d = _as_points(x) - self.c
        return d, d @ self.e_s, d @ self.e_n

    def _chi(self, s, n):
        hl, hw, w = 0.5 * self.length, self.half_width, self.transition
        cs, ds = window(s, -hl, hl, w)
        cn, dn = window(n, -hw, hw, w)
        chi = cs * cn
        grad = (ds * cn)[:, None] * self.e_s + (cs * dn)[:, None] * self.e_n
        return chi, grad

    def stream(self, t, x):
        d, s, n = self._local(x)
        chi, _ = self._chi(s, n)
        return chi * (self.v[1] * d[:, 0] - self.v[0] * d[:, 1])

    def velocity(self, t, x):
        d, s, n = self._local(x)
        chi, g = self._chi(s, n)
        ell = self.v[1] * d[:, 0] - self.v[0] * d[:, 1]
        # grad Psi = ell grad chi + chi (v2, -v1); X = J grad Psi
        return chi[:, None] * self.v + ell[:, None] * np.column_stack([-g[:, 1], g[:, 0]])

    def in_support(self, t, x):
        _, s, n = self._local(x)
        return ((np.abs(s) < 0.5 * self.length + self.transition)
                & (np.abs(n) < self.half_width + self.transition))

    def support_polygon(self, plateau=False):
        extra = 0.0 if plateau else self.transition
        hl, hw = 0.5 * self.length + extra, self.half_width + extra
        corners = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
        return np.array([self.c + a * self.e_s + b * self.e_n for a, b in corners])

    def descriptor(self):
        return {
            "kind": TRANSLATION,
            "velocity": self.v.tolist(),
            "center": self.c.tolist(),
            "direction": self.e_s.tolist(),
            "length": self.length,
            "half_width": self.half_width,
            "transition": self.transition,
        }

    @classmethod
    def from_descriptor(cls, d):
        return cls(d["velocity"], d["center"], d["length"], d["half_width"],
                   d["transition"], d["direction"])


def _rectangle_perimeter(corners, n=100):
    closed = np.vstack([corners, corners[:1]])
    t = np.linspace(0.0, 1.0, n, endpoint=False)[:, None]
    return np.vstack([a + t * (b - a) for a, b in zip(closed[:-1], closed[1:])])


def _boundary_points(domain):
    return np.vstack([c.points for c in domain.components])


def _point_in_convex(x, corners):
    inside = np.ones(len(x), dtype=bool)
    closed = np.vstack([corners, corners[:1]])
    for a, b in zip(closed[:-1], closed[1:]):
        e = b - a
        inside &= (e[0] * (x[:, 1] - a[1]) - e[1] * (x[:, 0] - a[0])) >= 0
    return inside


def _translation_for(gamma0, v, domain, pad):
    c0 = gamma0.centroid
    radius = float(np.linalg.norm(gamma0.points - c0, axis=1).max())
    a = radius + pad
    probe = TranslationFlow(v, c0 + 0.5 * np.asarray(v), float(np.linalg.norm(v)) + 2 * a,
                            a, 0.0)
    rect = probe.support_polygon(plateau=True)
    perim = _rectangle_perimeter(rect)
    if not np.all(domain.inside(perim)) or np.any(_point_in_convex(_boundary_points(domain), rect)):
        raise SweepLeavesDomain("the padded straight-line sweep of the curve leaves the domain")
    clearance = float(domain.boundary_distance(perim).min())
    w = TRANSITION_FRACTION * clearance
    return TranslationFlow(v, probe.c, probe.length, a, w, probe.e_s)


# radial morph ----------------------------------------------------------------
def trig_modes(theta, n):
    """``cos k theta`` and ``sin k theta`` for ``k = 1..n`` along a new last axis."""
    th = np.asarray(theta, dtype=float)
    z = np.exp(1j * th)[..., None]
    zk = np.cumprod(np.broadcast_to(z, th.shape + (n,)), axis=-1)
    return zk.real, zk.imag


class TrigSeries:
    """Real trigonometric series ``a0 + sum a_k cos k theta + b_k sin k theta``."""

    def __init__(self, a0, a, b):
        self.a0 = float(a0)
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.k = np.arange(1, len(self.a) + 1)

    @classmethod
    def from_samples(cls, values):
        """Interpolating series from samples on the uniform grid ``2 pi j / N``."""
        n = len(values)
        f = np.fft.rfft(values) / n
        kmax = (n - 1) // 2
        return cls(f[0].real, 2 * f[1:kmax + 1].real, -2 * f[1:kmax + 1].imag)

    def _modes(self, th, modes=None):
        if modes is None:
            modes = trig_modes(th, len(self.k))
        n = len(self.k)
        return modes[0][..., :n], modes[1][..., :n]

    def __call__(self, theta, der=0, modes=None):
        """Value (``der=0``) or theta-derivative (``der=1``); ``modes`` may
        carry precomputed :func:`trig_modes` of at least this length."""
        th = np.asarray(theta, dtype=float)
        c, s = self._modes(th, modes)
        if der == 0:
            return self.a0 + c @ self.a + s @ self.b
        if der == 1:
            return (s @ (-self.a * self.k)) + c @ (self.b * self.k)
        raise ValueError("der must be 0 or 1")

    def antiderivative(self, theta, modes=None):
        """``int_0^theta`` of the series."""
        th = np.asarray(theta, dtype=float)
        c, s = self._modes(th, modes)
        return (self.a0 * th + s @ (self.a / self.k)
                + (1 - c) @ (self.b / self.k))

    def to_json(self):
        return {"a0": self.a0, "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(d["a0"], d["a"], d["b"])


def _polar_radius(curve, center, n=N_MODES_GRID):
    """Radius function of a curve star-shaped about ``center``, as a series."""
    d = curve.points - center
    theta = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    dth = np.diff(np.append(theta, theta[0] + 2 * np.pi))
    if not (np.all(dth > 0) and abs(theta[-1] - theta[0] + dth[-1] - 2 * np.pi) < 1e-9):
        raise NotStarShaped("curve is not star-shaped about the morph center")
    rho = np.linalg.norm(d, axis=1)
    if rho.min() <= 0:
        raise NotStarShaped("morph center lies on the curve")
    th0 = theta[0]
    th = np.append(theta - th0, 2 * np.pi)
    sp = CubicSpline(th, np.append(rho, rho[0]), bc_type="periodic")
    grid = 2 * np.pi * np.arange(n) / n
    vals = sp(np.mod(grid - th0, 2 * np.pi))
    return TrigSeries.from_samples(vals)


def _product(p, q, n=2 * N_MODES_GRID):
    grid = 2 * np.pi * np.arange(n) / n
    return TrigSeries.from_samples(p(grid) * q(grid))


class RadialMorphFlow(ModelFlow):
    """Area-preserving interpolation between two star-shaped curves.

    ``R(theta, t) = s(t) ((1 - t) r0 + t r1)`` with ``s(t)`` fixing the
    enclosed area.  With ``alpha(theta, t) = 1/2 int_0^theta R^2`` and
    ``D = d_t alpha`` the stream function is ``Psi = -(rho / R)^2 D``,
    multiplied by a radial cutoff about the center.
    """

    kind = RADIAL_MORPH

    def __init__(self, center, r0, r1, r_in, r_out, w_in, w_out):
        self.center = np.asarray(center, dtype=float)
        self.r0, self.r1 = r0, r1
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.w_in, self.w_out = float(w_in), float(w_out)
        self._h = {}
        for key, (p, q) in {"00": (r0, r0), "01": (r0, r1), "11": (r1, r1)}.items():
            pr = _product(p, q)
            self._h[key] = TrigSeries(0.5 * pr.a0, 0.5 * pr.a, 0.5 * pr.b)
        self._A = {k: 2 * np.pi * v.a0 for k, v in self._h.items()}

    # time profile ------------------------------------------------------
    def _area_lin(self, t):
        A = self._A
        val = (1 - t) ** 2 * A["00"] + 2 * t * (1 - t) * A["01"] + t * t * A["11"]
        der = -2 * (1 - t) * A["00"] + 2 * (1 - 2 * t) * A["01"] + 2 * t * A["11"]
        return val, der

    def _s2(self, t):
        al, dal = self._area_lin(t)
        s2 = self._A["00"] / al
        return s2, -self._A["00"] * dal / al ** 2

    def _modes(self, theta):
        n = max(len(s.k) for s in (self.r0, self.r1, *self._h.values()))
        return trig_modes(theta, n)

    def radius(self, theta, t, der=False, modes=None):
        if modes is None:
            modes = self._modes(theta)
        s2, ds2 = self._s2(t)
        s = math.sqrt(s2)
        r0, r1 = self.r0(theta, modes=modes), self.r1(theta, modes=modes)
        lin = (1 - t) * r0 + t * r1
        R = s * lin
        if not der:
            return R
        R_th = s * ((1 - t) * self.r0(theta, 1, modes) + t * self.r1(theta, 1, modes))
        R_t = ds2 / (2 * s) * lin + s * (r1 - r0)
        return R, R_th, R_t

    def _D(self, theta, t, modes=None):
        if modes is None:
            modes = self._modes(theta)
        h = self._h
        b00, b01, b11 = (h[k].antiderivative(theta, modes) for k in ("00", "01", "11"))
        beta_t = -2 * (1 - t) * b00 + 2 * (1 - 2 * t) * b01 + 2 * t * b11
        beta = (1 - t) ** 2 * b00 + 2 * t * (1 - t) * b01 + t * t * b11
        s2, ds2 = self._s2(t)
        return ds2 * beta + s2 * beta_t

    def curve(self, t, m=128):
        theta = 2 * np.pi * np.arange(m) / m
        R = self.radius(theta, t)
        return self.center + R[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])

    # fields -------------------------------------------------------------
    def _polar(self, x):
        d = _as_points(x) - self.center
        rho = np.hypot(d[:, 0], d[:, 1])
        theta = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
        return d, rho, theta

    def _cutoff(self, rho):
        return window(rho, self.r_in, self.r_out, self.w_in, self.w_out)

    def stream(self, t, x):
        _, rho, theta = self._polar(x)
        chi, _ = self._cutoff(rho)
        modes = self._modes(theta)
        R = self.radius(theta, t, modes=modes)
        return -chi * (rho / R) ** 2 * self._D(theta, t, modes)

    def velocity(self, t, x):
        d, rho, theta = self._polar(x)
        out = np.zeros_like(d)
        chi, dchi = self._cutoff(rho)
        live = (chi > 0) & (rho > 0)
        if not live.any():
            return out
        rho, theta, chi, dchi, d = rho[live], theta[live], chi[live], dchi[live], d[live]
        modes = self._modes(theta)
        R, R_th, R_t = self.radius(theta, t, der=True, modes=modes)
        D = self._D(theta, t, modes)
        D_th = R * R_t
        lam2 = (rho / R) ** 2
        psi = -lam2 * D
        psi_rho = -2 * rho * D / R ** 2
        psi_th = -rho ** 2 * (D_th / R ** 2 - 2 * D * R_th / R ** 3)
        e_r = d / rho[:, None]
        e_t = np.column_stack([-e_r[:, 1], e_r[:, 0]])
        a = dchi * psi + chi * psi_rho
        b = chi * psi_th / rho
        out[live] = a[:, None] * e_t - b[:, None] * e_r
        return out

    def in_support(self, t, x):
        _, rho, _ = self._polar(x)
        lo = self.r_in - self.w_in if self.w_in > 0 else -np.inf
        return (rho > lo) & (rho < self.r_out + self.w_out)

    def descriptor(self):
        return {
            "kind": RADIAL_MORPH,
            "center": self.center.tolist(),
            "r0": self.r0.to_json(),
            "r1": self.r1.to_json(),
            "r_in": self.r_in,
            "r_out": self.r_out,
            "w_in": self.w_in,
            "w_out": self.w_out,
        }

    @classmethod
    def from_descriptor(cls, d):
        return cls(d["center"], TrigSeries.from_json(d["r0"]), TrigSeries.from_json(d["r1"]),
                   d["r_in"], d["r_out"], d["w_in"], d["w_out"])


def _morph_for(gamma0, gamma1, domain, pad, center=None):
    cands = [center] if center is not None else [
        gamma0.centroid, gamma1.centroid, 0.5 * (gamma0.centroid + gamma1.centroid)]
    err = None
    for c in cands:
        try:
            r0 = _polar_radius(gamma0, np.asarray(c, float))
            r1 = _polar_radius(gamma1, np.asarray(c, float))
            break
        except NotStarShaped as e:
            err = e
    else:
        raise err
    probe = RadialMorphFlow(c, r0, r1, 0.0, np.inf, 0.0, 1.0)
    theta = 2 * np.pi * np.arange(256) / 256
    Rs = np.array([probe.radius(theta, t) for t in np.linspace(0, 1, 21)])
    if Rs.min() <= 0:
        raise NotStarShaped("interpolated radius function is not positive")
    r_out = float(Rs.max()) + pad
    r_in = float(Rs.min()) - pad
    bpts = _boundary_points(domain)
    brho = np.linalg.norm(bpts - np.asarray(c, float), axis=1)
    if np.any((brho >= r_in) & (brho <= r_out)):
        raise SweepLeavesDomain("the padded morph annulus meets the domain boundary")
    outer = brho[brho > r_out]
    if outer.size == 0:
        raise SweepLeavesDomain("morph annulus is not enclosed by the domain")
    w_out = TRANSITION_FRACTION * float(outer.min() - r_out)
    inner = brho[brho < r_in]
    if inner.size and r_in > 0:
        w_in = TRANSITION_FRACTION * float(r_in - inner.max())
    else:
        r_in, w_in = 0.0, 0.0
    return RadialMorphFlow(c, r0, r1, r_in, r_out, w_in, w_out)


# composite -------------------------------------------------------------------
class CompositeFlow(ModelFlow):
    """``first`` on ``[0, 1/2]`` then ``second`` on ``[1/2, 1]``.

    Each phase runs on the rescaled clock ``sigma(2t)`` (resp.
    ``sigma(2t - 1)``) with ``sigma`` the quintic smoothstep, so the
    velocity vanishes at ``t = 1/2`` and stays continuous in time while
    each phase still completes its full motion.
    """

    kind = COMPOSITE

    def __init__(self, first, second):
        self.first, self.second = first, second

    def _pick(self, t):
        if t < 0.5:
            f, u = self.first, 2 * t
        else:
            f, u = self.second, 2 * t - 1
        v, d, _ = smoothstep(np.array(u))
        return f, float(v), 2 * float(d)

    def stream(self, t, x):
        f, s, rate = self._pick(t)
        return rate * f.stream(s, x)

    def velocity(self, t, x):
        f, s, rate = self._pick(t)
        if rate == 0:
            return np.zeros_like(_as_points(x))
        return rate * f.velocity(s, x)

    def in_support(self, t, x):
        f, s, _ = self._pick(t)
        return f.in_support(s, x)

    def descriptor(self):
        return {"kind": COMPOSITE, "first": self.first.descriptor(),
                "second": self.second.descriptor()}

    @classmethod
    def from_descriptor(cls, d):
        return cls(flow_from_descriptor(d["first"]), flow_from_descriptor(d["second"]))


def flow_from_descriptor(d):
    kinds = {TRANSLATION: TranslationFlow, RADIAL_MORPH: RadialMorphFlow,
             COMPOSITE: CompositeFlow}
    try:
        cls = kinds[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown flow kind {d.get('kind')!r}") from None
    return cls.from_descriptor(d)


# construction ----------------------------------------------------------------
def _translate_gap(gamma0, gamma1, v):
    if len(gamma0) == len(gamma1):
        return parametric_distance(gamma0.points + v, gamma1, k=0)
    return hausdorff_distance(gamma0.points + v, gamma1)


def build_model_flow(gamma0, gamma1, domain, scenario="auto", margin=None, pad=None,
                     check=True, dt=1e-2, translate_tol=None):
    """Divergence-free flow carrying ``gamma0`` onto ``gamma1`` inside ``domain``.

    Parameters
    ----------
    scenario : {"auto", "translation", "radial_morph", "composite"}
        ``auto`` picks translation when ``gamma1`` is a translate of
        ``gamma0``, then morph, then composite.
    margin : float, optional
        Required clearance of both curves from the boundary; default 1% of
        the domain diameter.
    pad : float, optional
        Plateau padding of the cutoff beyond the curve sweep; default 5%
        of the domain diameter.
    check : bool
        Integrate the flow and verify that ``gamma0`` lands on ``gamma1``.
    translate_tol : float, optional
        Largest gap between the shifted ``gamma0`` and ``gamma1`` that still
        counts as a translate; default ``1e-6`` of the domain diameter.
    """
    diam = domain.diameter
    margin = 0.01 * diam if margin is None else float(margin)
    pad = 0.05 * diam if pad is None else float(pad)
    a0, a1 = gamma0.area, gamma1.area
    if abs(a0 - a1) > AREA_RTOL * abs(a0):
        raise AreaMismatch(f"areas differ: {a0:.6g} vs {a1:.6g}")
    for name, g in (("gamma0", gamma0), ("gamma1", gamma1)):
        if not np.all(domain.inside(g.points, margin=margin)):
            raise CurveNotInDomain(f"{name} is not inside the domain with margin {margin:.3g}")
    if enclosed_holes(domain, gamma0) != enclosed_holes(domain, gamma1):
        raise HomotopyClassMismatch("curves enclose different holes")

    v = gamma1.centroid - gamma0.centroid
    tol = 1e-6 * diam if translate_tol is None else float(translate_tol)
    is_translate = _translate_gap(gamma0, gamma1, v) <= tol
    if scenario == "auto":
        if is_translate:
            scenario = TRANSLATION
        elif np.linalg.norm(v) <= 1e-6 * diam:
            scenario = RADIAL_MORPH
        else:
            scenario = COMPOSITE
    if scenario == TRANSLATION:
        if not is_translate:
            raise ScenarioMismatch("gamma1 is not a translate of gamma0")
        flow = _translation_for(gamma0, v, domain, pad)
    elif scenario == RADIAL_MORPH:
        flow = _morph_for(gamma0, gamma1, domain, pad)
    elif scenario == COMPOSITE:
        first = _translation_for(gamma0, v, domain, pad)
        moved = JordanCurve(gamma0.points + v, check=False)
        second = _morph_for(moved, gamma1, domain, pad, center=gamma1.centroid)
        flow = CompositeFlow(first, second)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    if check:
        end = advect(flow, gamma0, 0.0, 1.0, dt, domain=domain)
        if scenario == TRANSLATION and len(end) == len(gamma1):
            gap = parametric_distance(end, gamma1, k=0)
        else:
            gap = hausdorff_distance(end, gamma1)
        if gap > POSTCHECK_RTOL * diam:
            raise ScenarioMismatch(f"model flow misses gamma1 by {gap:.3g}")
    log.info("model flow: %s", flow.kind)
    return flow


# advection -------------------------------------------------------------------
def _field(velocity):
    return velocity.velocity if hasattr(velocity, "velocity") else velocity


def rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def n_steps(t0, t1, dt):
    span = t1 - t0
    if not dt > 0:
        raise ValueError("dt must be positive")
    if span < 0:
        raise ValueError("t1 must not precede t0")
    if span == 0:
        return 0
    if dt > span * (1 + 1e-12):
        raise ValueError("dt exceeds the integration interval")
    return max(1, int(math.ceil(span / dt - 1e-9)))


def advect_steps(velocity, curve, t0, t1, dt, domain=None, resample=True,
                 check_simple=True):
    """Yield ``(t, points)`` after every RK4 step from ``t0`` to ``t1``.

    The step is ``(t1 - t0) / n`` with ``n = ceil((t1 - t0) / dt)`` so the
    grid ends exactly at ``t1``.
    """
    f = _field(velocity)
    x = np.array(curve.points if isinstance(curve, JordanCurve) else curve, dtype=float)
    n = n_steps(t0, t1, dt)
    h = (t1 - t0) / n if n else 0.0
    for k in range(n):
        t = t0 + k * h
        x = rk4_step(f, t, x, h)
        t_new = t0 + (k + 1) * h if k + 1 < n else t1
        if domain is not None:
            bad = ~domain.inside(x)
            if bad.any():
                raise CurveLeftDomain(
                    f"{int(bad.sum())} curve points left the domain at t={t_new:.6g}")
        if check_simple and _segments_intersect(x):
            raise SelfIntersection(f"curve self-intersects at t={t_new:.6g}")
        if resample:
            seg = np.linalg.norm(np.roll(x, -1, axis=0) - x, axis=1)
            if seg.min() <= 0 or seg.max() / seg.min() > MAX_SPACING_RATIO:
                log.info("arc-length resampling at t=%.6g (spacing ratio %.3g)",
                         t_new, seg.max() / max(seg.min(), 1e-300))
                x = _resample_closed(x, len(x))
        yield t_new, x


def advect(velocity, curve, t0, t1, dt, domain=None, resample=True, check_simple=True):
    """Flow map of ``velocity`` applied to the nodes of ``curve`` (RK4).

    ``velocity`` is a callable ``(t, x) -> (P, 2)`` or an object with a
    ``velocity`` method of that signature.

    Raises
    ------
    CurveLeftDomain
        If any node leaves the domain.
    SelfIntersection
        If the polyline stops being simple.
    """
    x = np.array(curve.points, dtype=float)
    for _, x in advect_steps(velocity, curve, t0, t1, dt, domain, resample, check_simple):
        pass
    if _shoelace(x) <= 0:
        raise SelfIntersection("advected curve lost its orientation")
    try:
        return JordanCurve(x, check=False, check_orientation=True, check_spacing=False)
    except InvalidCurve as e:
        raise SelfIntersection(str(e)) from e


def ramp_factor(t, tau):
    """``(tau - t)^2 / tau^2`` on ``[0, tau]``."""
    if not tau > 0:
        raise OutOfRange("tau must be positive")
    if t < 0 or t > tau:
        raise OutOfRange(f"t={t} outside [0, {tau}]")
    return (tau - t) ** 2 / tau ** 2
