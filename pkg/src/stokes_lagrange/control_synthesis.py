"""Boundary control synthesis.

A control is a Stokes field in the domain that matches prescribed
velocities on a tube around a curve and (approximately) vanishes on the
uncontrolled boundary.  Its trace on sigma is the control signal.  One
least-squares solve does the job: match rows with weight 1, homogeneous
rows on the uncontrolled boundary with weight ``rho``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .approximation import DEFAULT_TAU_SVD, tsvd_solve
from .errors import DegenerateProblem, InfeasibleFlux, MissingNormals
from .geometry import CollocationSet, tube
from .stokes_basis import StokesBasis, eval_velocity

log = logging.getLogger(__name__)

DEFAULT_RHO = 10.0
FLUX_RTOL = 1e-4


def flux(velocities, colloc):
    """Quadrature of ``u . n`` over a collocation set with normals."""
    if colloc.normals is None:
        raise MissingNormals("flux needs normals on the collocation set")
    u = np.asarray(velocities, dtype=float).reshape(-1, 2)
    return float(np.sum(colloc.weights * np.einsum("ij,ij->i", u, colloc.normals)))


def homogeneous_set(domain, n_gauss=4):
    """Boundary quadrature restricted to the uncontrolled boundary."""
    quad = domain.boundary_quadrature(n_gauss)
    return quad.subset(~domain.sigma_mask(quad))


def sigma_set(domain, n_gauss=4):
    quad = domain.boundary_quadrature(n_gauss)
    return quad.subset(domain.sigma_mask(quad))


@dataclass(frozen=True)
class ControlProblem:
    """Match ``targets`` on ``match_set``; zero on ``homogeneous``.

    ``curve_set`` is the subset of the match set lying on the transported
    curve itself; it is used to check that the targets carry no net flux.
    """

    domain: object
    match_set: CollocationSet
    targets: np.ndarray
    homogeneous: CollocationSet
    rho: float = DEFAULT_RHO
    curve_set: CollocationSet | None = None
    curve_targets: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if len(t) != len(self.match_set):
            raise ValueError("one target velocity per match point")
        object.__setattr__(self, "targets", t)
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if len(self.homogeneous) and self.homogeneous.spacing > self.match_set.spacing * (1 + 1e-9):
            raise ValueError(
                "uncontrolled boundary sampled more coarsely than the match set"
            )

    @classmethod
    def around_curve(cls, domain, curve, field, delta, rho=DEFAULT_RHO, n_gauss=4):
        """Tube match set around ``curve`` with ``field(points) -> (P, 2)``."""
        ts = tube(curve, delta, domain)
        on_curve = ts.subset(ts.tags == 0.0)
        return cls(domain, ts, field(ts.points), homogeneous_set(domain, n_gauss), rho,
                   on_curve, field(on_curve.points))

    def scaled(self, s):
        return ControlProblem(self.domain, self.match_set, s * self.targets, self.homogeneous,
                              self.rho, self.curve_set,
                              None if self.curve_targets is None else s * self.curve_targets)


@dataclass(frozen=True)
class SynthesizedControl:
    basis: StokesBasis
    coefficients: np.ndarray
    trace_s: np.ndarray
    trace_points: np.ndarray
    trace_on_sigma: np.ndarray
    residual_match: float
    residual_homogeneous: float
    sigma_flux: float
    boundary_flux: float
    smax: float
    smin: float
    rank: int

    def velocity(self, x):
        return eval_velocity(self.basis, self.coefficients, x)

    def to_json(self):
        return {
            "coefficients": self.coefficients.tolist(),
            "trace": {
                "s": self.trace_s.tolist(),
                "points": self.trace_points.tolist(),
                "velocity": self.trace_on_sigma.tolist(),
            },
            "residual_match": self.residual_match,
            "residual_homogeneous": self.residual_homogeneous,
            "sigma_flux": self.sigma_flux,
            "boundary_flux": self.boundary_flux,
            "smax": self.smax,
            "smin": self.smin,
            "rank": self.rank,
        }


def _check_flux(problem):
    cs = problem.curve_set
    if cs is None or len(cs) == 0 or cs.normals is None:
        return
    implied = flux(problem.curve_targets, cs)
    speed = float(np.linalg.norm(problem.targets, axis=1).max(initial=0.0))
    tol = FLUX_RTOL * problem.domain.diameter * speed
    if abs(implied) > tol:
        raise InfeasibleFlux(
            f"targets carry net flux {implied:.3g} through the curve (tolerance {tol:.3g})"
        )


def _row_scale(weights):
    return np.sqrt(weights / weights.mean()) if len(weights) else weights


def synthesize(problem, basis, tau_svd=DEFAULT_TAU_SVD, trace_resolution=128,
               zero_flux=True):
    """Single weighted least-squares fit over match and homogeneous rows.

    With ``zero_flux`` the coefficients are restricted to the hyperplane
    where the quadrature flux through the uncontrolled boundary vanishes,
    so the sigma trace has zero net flux up to rounding.  The constraint
    is imposed through an orthonormal null-space basis, not a penalty
    row, so it does not disturb the SVD truncation.
    """
    if len(problem.match_set) == 0:
        raise DegenerateProblem("empty match set")
    if basis.n_columns == 0:
        raise DegenerateProblem("empty basis")
    _check_flux(problem)
    ms, hs = problem.match_set, problem.homogeneous
    n = basis.n_columns
    wm = _row_scale(ms.weights)
    A = [(wm[:, None, None] * basis.velocity_matrix(ms.points)).reshape(-1, n)]
    b = [(wm[:, None] * problem.targets).reshape(-1)]
    Q = None
    if len(hs):
        V = basis.velocity_matrix(hs.points)
        wh = problem.rho * _row_scale(hs.weights)
        A.append((wh[:, None, None] * V).reshape(-1, n))
        b.append(np.zeros(2 * len(hs)))
        if zero_flux and hs.normals is not None and n > 1:
            f = np.einsum("p,pi,pic->c", hs.weights, hs.normals, V)
            if np.linalg.norm(f) > 0:
                Q = np.linalg.qr(f[:, None], mode="complete")[0][:, 1:]
    A = np.vstack(A)
    b = np.concatenate(b)
    if Q is None:
        c, smax, smin, rank = tsvd_solve(A, b, tau_svd)
    else:
        z, smax, smin, rank = tsvd_solve(A @ Q, b, tau_svd)
        c = Q @ z
    log.debug("synthesis: %d rows, %d columns, rank %d", A.shape[0], n, rank)
    return finalize(problem.domain, basis, c, problem, smax, smin, rank, trace_resolution)


def finalize(domain, basis, c, problem=None, smax=float("nan"), smin=float("nan"),
             rank=0, trace_resolution=128):
    """Wrap coefficients as a control with recomputed diagnostics."""
    c = np.asarray(c, dtype=float)
    quad = domain.boundary_quadrature()
    on_sigma = domain.sigma_mask(quad)
    u_b = eval_velocity(basis, c, quad.points)
    hom = ~on_sigma
    res_h = float(np.linalg.norm(u_b[hom], axis=1).max(initial=0.0))
    un = quad.weights * np.einsum("ij,ij->i", u_b, quad.normals)
    sig_flux = float(un[on_sigma].sum())
    tot_flux = float(un.sum())
    res_m = 0.0
    if problem is not None:
        if problem.homogeneous is not None and len(problem.homogeneous):
            u_h = eval_velocity(basis, c, problem.homogeneous.points)
            res_h = max(res_h, float(np.linalg.norm(u_h, axis=1).max()))
        u_m = eval_velocity(basis, c, problem.match_set.points)
        res_m = float(np.linalg.norm(u_m - problem.targets, axis=1).max())
    s, pts, vel = _trace(domain, basis, c, trace_resolution)
    return SynthesizedControl(basis, c, s, pts, vel, res_m, res_h, sig_flux, tot_flux,
                              smax, smin, rank)


def _trace(domain, basis, c, resolution):
    if not domain.sigma:
        return np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2))
    _, s, pts = domain.sigma_points(resolution)
    return s, pts, eval_velocity(basis, c, pts)


def control_trace(control, resolution, domain=None):
    """Velocity samples at arc-length-uniform points of sigma.

    Returns ``(s, points, velocities)``; ``resolution + 1`` samples per
    arc, endpoints included, so doubling the resolution reproduces every
    coarse sample.
    """
    domain = domain or control.basis.domain
    return _trace(domain, control.basis, control.coefficients, resolution)


def trace_to_csv(s, velocities):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "u1", "u2"])
    for si, (u1, u2) in zip(s, velocities):
        w.writerow([repr(float(si)), repr(float(u1)), repr(float(u2))])
    return buf.getvalue()


def reimpose_trace(control, rho=DEFAULT_RHO, tau_svd=DEFAULT_TAU_SVD, n_gauss=4):
    """Refit a field from its own boundary data: the sigma trace as target
    on sigma and zero on the uncontrolled boundary."""
    domain = control.basis.domain
    sig = sigma_set(domain, n_gauss)
    prob = ControlProblem(domain, sig, control.velocity(sig.points),
                          homogeneous_set(domain, n_gauss), rho)
    return synthesize(prob, control.basis, tau_svd)
