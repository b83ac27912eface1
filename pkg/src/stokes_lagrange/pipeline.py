"""Quasi-static control loop.

Time nodes ``t_i`` carry stationary controls ``U_i`` fitted to the model
flow near the reference curve ``gamma(t_i)``.  A smooth partition of unity
blends them into ``U(t, x) = sum_i kappa_i(t) U_i(x)``, which is advected
from ``gamma0``.  The model flow ``X`` is only a reference: the transported
curve always moves with ``U``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .approximation import DEFAULT_TAU_SVD
from .control_synthesis import DEFAULT_RHO, ControlProblem, finalize, synthesize
from .errors import (BlobEscapesDuringRamp, ConfigError, CurveLeftDomain, IncompleteTrajectory,
                     ScenarioMismatch, SynthesisResidualTooLarge)
from .geometry import (TUBE_LAYERS, Domain, JordanCurve, hausdorff_distance,
                       parametric_distance)
from .model_flow import (POSTCHECK_RTOL, advect, advect_steps, build_model_flow, ramp_factor,
                         smoothstep)
from .stokes_basis import StokesBasis, eval_gradient, eval_velocity, place_sources

log = logging.getLogger(__name__)

THREADS_ENV = "STOKES_LAGRANGE_THREADS"
MAX_RAMP_BISECTIONS = 5


# configuration ---------------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; validated on construction.

    ``eta`` may be a scalar or one half-width per node; by default it is
    1.2 times half the node spacing.  ``basis_size`` is the number of
    Stokeslet locations per excluded region (int or per-region list).
    ``translate_tol`` is passed to :func:`build_model_flow`.
    """

    domain: Domain
    gamma0: JordanCurve
    gamma1: JordanCurve
    scenario: str = "auto"
    n_nodes: int = 8
    eta: object = None
    delta: float = 0.08
    basis_size: object = 128
    offset: object = None
    tau_svd: float = DEFAULT_TAU_SVD
    dt: float = 5e-3
    rho: float = DEFAULT_RHO
    residual_tol: float = math.inf
    margin: float | None = None
    pad: float | None = None
    trace_resolution: int = 128
    seed: int = 0
    translate_tol: float | None = None

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise ConfigError("n_nodes must be an integer >= 2")
        if not self.delta > 0:
            raise ConfigError("tube thickness delta must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        eta = self.etas
        if np.any(eta <= 0):
            raise ConfigError("node half-widths eta must be positive")
        t = self.nodes
        gaps = np.diff(t)
        if np.any(gaps >= eta[:-1] + eta[1:]):
            raise ConfigError(
                "time nodes do not cover [0, 1]: need t_{i+1} - t_i < eta_i + eta_{i+1}")
        if self.dt > gaps.min() / 10 * (1 + 1e-12):
            raise ConfigError("dt must not exceed one tenth of the node spacing")

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, int(self.n_nodes))

    @property
    def etas(self):
        n = int(self.n_nodes)
        if self.eta is None:
            return np.full(n, 1.2 * 0.5 / (n - 1))
        e = np.asarray(self.eta, dtype=float)
        if e.ndim == 0:
            return np.full(n, float(e))
        if e.shape != (n,):
            raise ConfigError("eta must be a scalar or one value per node")
        return e


# partition of unity ----------------------------------------------------------
def partition_weights(t, nodes, etas):
    """Normalized C^2 hats ``S(1 - |t - t_i| / eta_i)``; rows sum to one."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = 1.0 - np.abs(t[:, None] - nodes[None, :]) / etas[None, :]
    h, _, _ = smoothstep(u)
    total = h.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("time outside the node covering")
    return h / total


class BlendedControl:
    """``U(t, x) = sum_i kappa_i(t) U_i(x)`` over per-node controls.

    All nodes share one basis, so ``U(t, .)`` is the basis field with
    coefficients ``sum_i kappa_i(t) c_i``, an exact Stokes solution at
    every ``t``.
    """

    def __init__(self, controls, nodes, etas):
        if not controls:
            raise ValueError("no node controls")
        self.controls = list(controls)
        self.basis = self.controls[0].basis
        self.nodes = np.asarray(nodes, dtype=float)
        self.etas = np.asarray(etas, dtype=float)
        self._C = np.array([c.coefficients for c in self.controls])

    def kappa(self, t):
        return partition_weights(t, self.nodes, self.etas)

    def coefficients(self, t):
        return self.kappa(t)[0] @ self._C

    def velocity(self, t, x):
        return eval_velocity(self.basis, self.coefficients(t), x)

    def __call__(self, t, x):
        return self.velocity(t, x)

    def gradient(self, t, x):
        return eval_gradient(self.basis, self.coefficients(t), x)

    def trace(self, t, resolution=128):
        _, s, pts = self.basis.domain.sigma_points(resolution)
        return s, eval_velocity(self.basis, self.coefficients(t), pts)

    def node_variation(self, points):
        """Max over adjacent nodes of ``max |U_{i+1} - U_i|`` on ``points``."""
        out = 0.0
        V = self.basis.velocity_matrix(points)
        for a, b in zip(self._C[:-1], self._C[1:]):
            out = max(out, float(np.linalg.norm(V @ (b - a), axis=1).max()))
        return out

    def to_json(self):
        return {
            "basis": self.basis.to_json(),
            "nodes": self.nodes.tolist(),
            "eta": self.etas.tolist(),
            "controls": [c.to_json() for c in self.controls],
        }

    @classmethod
    def from_json(cls, obj, domain):
        basis = StokesBasis.from_json(obj["basis"], domain)
        controls = [finalize(domain, basis, c["coefficients"]) for c in obj["controls"]]
        return cls(controls, obj["nodes"], obj["eta"])


class RampedField:
    """``ramp_factor(t, tau) * u0`` on ``[0, tau]``."""

    def __init__(self, basis, coefficients, tau):
        self.basis = basis
        self.c = np.asarray(coefficients, dtype=float)
        self.tau = float(tau)

    def velocity(self, t, x):
        return ramp_factor(min(max(t, 0.0), self.tau), self.tau) * eval_velocity(
            self.basis, self.c, x)

    def gradient(self, t, x):
        return ramp_factor(min(max(t, 0.0), self.tau), self.tau) * eval_gradient(
            self.basis, self.c, x)


# trajectory ------------------------------------------------------------------
@dataclass
class Trajectory:
    """Snapshots of the transported curve plus per-snapshot diagnostics."""

    times: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    area: list = field(default_factory=list)
    min_wall_distance: list = field(default_factory=list)
    tube_error: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    complete: bool = False
    final: dict = field(default_factory=dict)
    gronwall: dict = field(default_factory=dict)
    nodes: dict = field(default_factory=dict)
    domain: Domain | None = None
    gamma1: JordanCurve | None = None
    control: object = field(default=None, repr=False, compare=False)

    def append(self, t, points, area, wall, tube_err, grad):
        if self.times and not t > self.times[-1]:
            raise ValueError("snapshot times must increase strictly")
        self.times.append(float(t))
        self.curves.append(np.array(points, dtype=float))
        self.area.append(float(area))
        self.min_wall_distance.append(float(wall))
        self.tube_error.append(float(tube_err))
        self.grad_norm.append(float(grad))

    @property
    def final_curve(self):
        return JordanCurve(self.curves[-1], check=False)

    def to_json(self):
        return {
            "format": "stokes_lagrange.trajectory",
            "version": 1,
            "complete": self.complete,
            "domain": None if self.domain is None else self.domain.to_json(),
            "gamma1": None if self.gamma1 is None else self.gamma1.to_json(),
            "snapshots": [{"t": t, "points": c.tolist()} for t, c in zip(self.times, self.curves)],
            "diagnostics": {
                "area": self.area,
                "min_wall_distance": self.min_wall_distance,
                "tube_error": self.tube_error,
                "grad_norm": self.grad_norm,
            },
            "nodes": self.nodes,
            "final": self.final,
            "gronwall": self.gronwall,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            tr = cls()
            tr.domain = Domain.from_json(obj["domain"]) if obj.get("domain") else None
            tr.gamma1 = JordanCurve.from_json(obj["gamma1"], check=False) if obj.get("gamma1") else None
            d = obj["diagnostics"]
            for k, snap in enumerate(obj["snapshots"]):
                tr.append(snap["t"], snap["points"], d["area"][k], d["min_wall_distance"][k],
                          d["tube_error"][k], d["grad_norm"][k])
            tr.complete = bool(obj["complete"])
            tr.final = dict(obj.get("final", {}))
            tr.gronwall = dict(obj.get("gronwall", {}))
            tr.nodes = dict(obj.get("nodes", {}))
        except (KeyError, IndexError, TypeError) as e:
            raise IncompleteTrajectory(f"malformed trajectory: {e}") from e
        return tr

    def to_csv(self):
        from .artifacts import diagnostics_csv
        return diagnostics_csv(self)


# building blocks -------------------------------------------------------------
def build_basis(config):
    return place_sources(config.domain, config.basis_size, config.offset)


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def reference_curves(flow, gamma0, times, dt, domain=None):
    """``gamma(t_i) = phi^X(t_i, 0, gamma0)`` for increasing ``times``."""
    out, cur, t_prev = [], gamma0, 0.0
    for t in times:
        if t > t_prev:
            cur = advect(flow, cur, t_prev, t, min(dt, t - t_prev), domain=domain,
                         resample=False)
        out.append(cur)
        t_prev = t
    return out


def synthesize_nodes(config, flow, basis, refs):
    """One control per node; returns controls and per-node residuals.

    Raises :class:`SynthesisResidualTooLarge` with the controls fitted so
    far attached as ``partial``.
    """
    def one(i):
        t_i = float(config.nodes[i])
        prob = ControlProblem.around_curve(
            config.domain, refs[i], lambda x: flow.velocity(t_i, x), config.delta, config.rho)
        return synthesize(prob, basis, config.tau_svd, config.trace_resolution)

    idx = range(len(refs))
    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            controls = list(ex.map(one, idx))
    else:
        controls = [one(i) for i in idx]
    for i, c in enumerate(controls):
        log.info("node %d: residual_match=%.3g residual_homogeneous=%.3g rank=%d",
                 i, c.residual_match, c.residual_homogeneous, c.rank)
        if c.residual_match > config.residual_tol:
            raise SynthesisResidualTooLarge(
                f"node {i} residual {c.residual_match:.3g} exceeds {config.residual_tol:.3g}",
                partial=controls[:i])
    return controls


def _tube_points(curve_pts, normals, delta):
    return np.vstack([curve_pts + f * delta * normals for f in TUBE_LAYERS])


def _spectral_norm_max(G):
    if len(G) == 0:
        return 0.0
    return float(np.linalg.norm(G, ord=2, axis=(1, 2)).max())


def _diagnose(domain, control, flow, t, pts, ref, delta):
    """Tube error and Lipschitz proxy at time ``t``.

    The tube is the unclipped tube around the reference curve restricted
    to the domain, together with the transported curve itself.
    """
    refc = JordanCurve(ref, check=False)
    tp = _tube_points(ref, refc.normals, delta)
    tp = tp[domain.inside(tp)]
    U = control.velocity(t, tp)
    X = flow.velocity(t, tp)
    err = float(np.linalg.norm(U - X, axis=1).max(initial=0.0))
    probe = np.vstack([tp, pts[domain.inside(pts)]])
    grad = _spectral_norm_max(control.gradient(t, probe))
    return err, grad


def track(config, control, flow, gamma0=None, t0=0.0, t1=1.0, traj=None, time_map=None):
    """Advect ``gamma0`` under ``control`` alongside the reference under
    ``flow``; append a snapshot and diagnostics after every step.

    ``time_map`` maps local time to the recorded time (used when a run is
    embedded in a longer schedule).
    """
    domain = config.domain
    gamma0 = config.gamma0 if gamma0 is None else gamma0
    traj = Trajectory(domain=domain, gamma1=config.gamma1) if traj is None else traj
    tm = time_map or (lambda s: s)
    cur = np.array(gamma0.points)
    ref = np.array(gamma0.points)
    if not traj.times:
        err, grad = _diagnose(domain, control, flow, t0, cur, ref, config.delta)
        traj.append(tm(t0), cur, gamma0.area, float(domain.boundary_distance(cur).min()),
                    err, grad)
    ref_steps = advect_steps(flow, ref, t0, t1, config.dt, domain=None, resample=False,
                             check_simple=False)
    try:
        for (t, cur), (_, ref) in zip(
                advect_steps(control, gamma0, t0, t1, config.dt, domain=domain), ref_steps):
            err, grad = _diagnose(domain, control, flow, t, cur, ref, config.delta)
            area = 0.5 * float(np.sum(cur[:, 0] * np.roll(cur[:, 1], -1)
                                      - np.roll(cur[:, 0], -1) * cur[:, 1]))
            traj.append(tm(t), cur, area, float(domain.boundary_distance(cur).min()), err, grad)
    except CurveLeftDomain as e:
        e.partial = traj
        raise
    return traj


def _finish(traj, config):
    end = traj.final_curve
    g1 = config.gamma1
    traj.final = {
        "hausdorff": hausdorff_distance(end, g1),
        "parametric": (parametric_distance(end, g1, k=0)
                       if len(end) == len(g1) else None),
        "area_drift": abs(traj.area[-1] - traj.area[0]) / abs(traj.area[0]),
        "min_wall_distance": min(traj.min_wall_distance),
    }
    traj.complete = True
    return traj


# main entry points -----------------------------------------------------------
@dataclass
class RunResult:
    trajectory: Trajectory
    flow: object
    control: BlendedControl
    gronwall: dict


def run(config):
    """Full pipeline; returns the :class:`Trajectory`."""
    return run_full(config).trajectory


def run_full(config):
    """Like :func:`run` but also returns the flow and blended control."""
    flow = build_model_flow(config.gamma0, config.gamma1, config.domain, config.scenario,
                            margin=config.margin, pad=config.pad,
                            translate_tol=config.translate_tol)
    basis = build_basis(config)
    refs = reference_curves(flow, config.gamma0, config.nodes, config.dt, config.domain)
    traj = Trajectory(domain=config.domain, gamma1=config.gamma1)
    try:
        controls = synthesize_nodes(config, flow, basis, refs)
    except SynthesisResidualTooLarge as e:
        traj.nodes = {"t": config.nodes.tolist(),
                      "residual_match": [c.residual_match for c in e.partial]}
        e.partial = traj
        raise
    control = BlendedControl(controls, config.nodes, config.etas)
    traj.nodes = _node_summary(config, controls, control, refs)
    track(config, control, flow, traj=traj)
    _finish(traj, config)
    report = verify_gronwall(traj, flow, control, delta=config.delta, dt=config.dt)
    traj.gronwall = report
    traj.control = control
    return RunResult(traj, flow, control, report)


def _node_summary(config, controls, control, refs):
    pts = np.vstack([r.points for r in refs])
    return {
        "t": config.nodes.tolist(),
        "eta": config.etas.tolist(),
        "residual_match": [c.residual_match for c in controls],
        "residual_homogeneous": [c.residual_homogeneous for c in controls],
        "sigma_flux": [c.sigma_flux for c in controls],
        "boundary_flux": [c.boundary_flux for c in controls],
        "rank": [c.rank for c in controls],
        "adjacent_variation": control.node_variation(pts),
    }


def _trapezoid(y, x):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x))) if len(x) > 1 else 0.0


def verify_gronwall(traj, flow, control, slack=2.0, delta=0.08, dt=None):
    """A posteriori check of the Gronwall estimate along a trajectory.

    ``lhs`` is the largest node-wise gap between the stored curves and the
    curve re-integrated under ``flow`` on the same time grid.  ``rhs`` is
    ``max_t sup_tube |U - X| * exp(int_0^1 max_tube |grad U| dt)`` with
    both quantities recomputed at the snapshot times.
    """
    if not traj.complete or len(traj.times) < 2:
        raise IncompleteTrajectory("trajectory is not complete")
    domain = traj.domain
    times = np.asarray(traj.times)
    ref = np.array(traj.curves[0])
    errs, grads, gaps = [], [], []
    for k, t in enumerate(times):
        if k:
            step = times[k] - times[k - 1]
            for _, ref in advect_steps(flow, ref, times[k - 1], t, step, resample=False,
                                       check_simple=False):
                pass
        cur = traj.curves[k]
        if len(cur) != len(ref):
            raise IncompleteTrajectory("curve resampled during transport; node-wise gap undefined")
        gaps.append(float(np.linalg.norm(cur - ref, axis=1).max()))
        if domain is None:
            e = float(np.linalg.norm(control.velocity(t, ref) - flow.velocity(t, ref), axis=1).max())
            g = _spectral_norm_max(control.gradient(t, np.vstack([ref, cur])))
        else:
            e, g = _diagnose(domain, control, flow, t, cur, ref, delta)
        errs.append(e)
        grads.append(g)
    lip = _trapezoid(grads, times)
    lhs = max(gaps)
    rhs = max(errs) * math.exp(lip) if lip < 700 else math.inf
    # re-integration on a recomputed time grid differs from the stored run by roundoff
    floor = 1e-12 * max(1.0, float(np.abs(traj.curves[0]).max()))
    return {
        "lhs": lhs,
        "lhs_final": gaps[-1],
        "rhs": rhs,
        "sup_tube_error": max(errs),
        "lipschitz_integral": lip,
        "slack": slack,
        "pass": bool(lhs <= slack * rhs + floor),
    }


class ScheduledControl:
    """Piecewise-in-time control: the ramp on ``[0, tau]`` then a blended
    control run on the clock ``s = (t - tau) / (1 - tau)``."""

    def __init__(self, ramp, blended, tau):
        self.ramp, self.blended, self.tau = ramp, blended, float(tau)
        self.basis = blended.basis

    def _phase(self, t):
        if t <= self.tau:
            return self.ramp, t, 1.0
        scale = 1.0 - self.tau
        return self.blended, (t - self.tau) / scale, 1.0 / scale

    def velocity(self, t, x):
        f, s, k = self._phase(t)
        return k * f.velocity(s, x)

    def gradient(self, t, x):
        f, s, k = self._phase(t)
        return k * f.gradient(s, x)

    def trace(self, t, resolution=128):
        _, s, pts = self.basis.domain.sigma_points(resolution)
        return s, self.velocity(t, pts)


def run_with_initial_condition(config, u0, tau, basis=None):
    """Run with the initial velocity ``u0`` imposed at ``t = 0``.

    ``u0`` holds coefficients on the run's basis.  On ``[0, tau]`` the
    field is ``ramp_factor(t, tau) * u0``; on ``[tau, 1]`` a standard run
    from the ramped curve in rescaled time.  ``tau`` is halved (at most
    five times) while the ramp pushes the curve closer to the wall than
    the configured margin.  ``u0 = 0`` is exactly :func:`run`.

    The tau actually used is recorded in ``trajectory.nodes["tau"]``.
    """
    u0 = np.asarray(u0, dtype=float)
    if not 0 < tau < 1:
        raise ConfigError("tau must lie in (0, 1)")
    if not np.any(u0):
        return run(config)
    basis = build_basis(config) if basis is None else basis
    margin = 0.01 * config.domain.diameter if config.margin is None else config.margin
    t_ramp = float(tau)
    for attempt in range(MAX_RAMP_BISECTIONS + 1):
        ramp = RampedField(basis, u0, t_ramp)
        dt = min(config.dt, t_ramp)
        try:
            mid = advect(ramp, config.gamma0, 0.0, t_ramp, dt, domain=config.domain)
            if config.domain.boundary_distance(mid.points).min() >= margin:
                break
        except CurveLeftDomain:
            pass
        if attempt == MAX_RAMP_BISECTIONS:
            raise BlobEscapesDuringRamp(
                f"ramp pushes the curve out of the domain even with tau={t_ramp:.3g}")
        log.warning("ramp with tau=%.4g leaves the margin; halving", t_ramp)
        t_ramp *= 0.5

    traj = Trajectory(domain=config.domain, gamma1=config.gamma1)
    track(replace(config, dt=dt), ramp, _IdentityFlow(), t0=0.0, t1=t_ramp, traj=traj)
    mid = JordanCurve(traj.curves[-1], check=False)

    scale = 1.0 - t_ramp
    # config.dt on the rescaled clock: physical steps shrink by the factor 1 - tau
    inner_cfg = replace(config, gamma0=mid)
    try:
        res = run_full(inner_cfg)
    except ScenarioMismatch:
        # the ramp deforms gamma0 slightly; its gap to a translate ends up in
        # the final distance
        tol = POSTCHECK_RTOL * config.domain.diameter
        log.warning("ramped curve is only a translate up to %.3g; accepting it", tol)
        res = run_full(replace(inner_cfg, translate_tol=tol))
    inner = res.trajectory
    for t, c, a, w, e, g in zip(inner.times[1:], inner.curves[1:], inner.area[1:],
                                inner.min_wall_distance[1:], inner.tube_error[1:],
                                inner.grad_norm[1:]):
        traj.append(t_ramp + t * scale, c, a, w, e / scale, g / scale)
    traj.nodes = dict(inner.nodes)
    traj.nodes["tau"] = t_ramp
    traj.gronwall = inner.gronwall
    traj.control = ScheduledControl(ramp, res.control, t_ramp)
    _finish(traj, config)
    return traj


class _IdentityFlow:
    def velocity(self, t, x):
        return np.zeros_like(np.asarray(x, dtype=float).reshape(-1, 2))
