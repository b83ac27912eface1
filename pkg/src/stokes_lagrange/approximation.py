"""Least-squares approximation of Stokes fields by basis combinations.

Given target velocities (and optionally gradients) on a point set inside
the domain, :func:`fit` finds coefficients of a :class:`StokesBasis` whose
field matches them, via a truncated SVD.  Residuals in the report are
always recomputed from the returned coefficients.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProblem
from .stokes_basis import eval_gradient, eval_velocity, place_sources

DEFAULT_TAU_SVD = 1e-10


@dataclass(frozen=True)
class ApproximationProblem:
    points: np.ndarray
    velocities: np.ndarray
    gradients: np.ndarray | None = None
    k: int = 0
    weights: np.ndarray | None = None
    tau_svd: float = DEFAULT_TAU_SVD

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        vel = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        if len(vel) != len(pts):
            raise ValueError("points and velocities differ in length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocities", vel)
        if self.k not in (0, 1):
            raise ValueError("matching order k must be 0 or 1")
        if self.k == 1:
            if self.gradients is None:
                raise ValueError("k=1 needs target gradients")
            g = np.asarray(self.gradients, dtype=float).reshape(-1, 2, 2)
            object.__setattr__(self, "gradients", g)
        w = np.ones(len(pts)) if self.weights is None else np.asarray(self.weights, float)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)
        if not 0 < self.tau_svd < 1:
            raise ValueError("tau_svd must lie in (0, 1)")

    def scaled(self, s):
        return ApproximationProblem(
            self.points, s * self.velocities,
            None if self.gradients is None else s * self.gradients,
            self.k, self.weights, self.tau_svd,
        )


@dataclass(frozen=True)
class FitReport:
    coefficients: np.ndarray
    residual_c0: float
    residual_c1: float | None
    smax: float
    smin: float
    basis_size: int
    rank: int


def tsvd_solve(A, b, tau):
    """Minimum-norm least-squares solution keeping singular values above
    ``tau * s_max``.  Returns ``(x, s_max, s_min_retained, rank)``."""
    if A.shape[1] == 0:
        return np.zeros(0), 0.0, 0.0, 0
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0:
        return np.zeros(A.shape[1]), 0.0, 0.0, 0
    keep = s > tau * s[0]
    r = int(keep.sum())
    x = vt[:r].T @ ((u[:, :r].T @ b) / s[:r])
    return x, float(s[0]), float(s[r - 1]), r


def _design(problem, basis):
    w = np.sqrt(problem.weights)
    mask = w > 0
    if not mask.any():
        raise DegenerateProblem("no target points with positive weight")
    pts = problem.points[mask]
    sw = w[mask]
    V = basis.velocity_matrix(pts)
    rows = [(sw[:, None, None] * V).reshape(-1, basis.n_columns)]
    rhs = [(sw[:, None] * problem.velocities[mask]).reshape(-1)]
    if problem.k == 1:
        G = basis.gradient_matrix(pts)
        rows.append((sw[:, None, None, None] * G).reshape(-1, basis.n_columns))
        rhs.append((sw[:, None, None] * problem.gradients[mask]).reshape(-1))
    return np.vstack(rows), np.concatenate(rhs)


def residuals(problem, basis, c):
    """Max-norm velocity (and gradient) mismatch over the target points."""
    u = eval_velocity(basis, c, problem.points)
    r0 = float(np.linalg.norm(u - problem.velocities, axis=1).max())
    r1 = None
    if problem.k == 1:
        g = eval_gradient(basis, c, problem.points)
        r1 = float(np.linalg.norm(g - problem.gradients, axis=(1, 2)).max())
    return r0, r1


def fit(problem, basis):
    """Weighted least-squares fit of ``problem`` in the span of ``basis``."""
    if len(problem.points) == 0:
        raise DegenerateProblem("no target points")
    if basis.n_columns == 0:
        raise DegenerateProblem("empty basis")
    A, b = _design(problem, basis)
    c, smax, smin, rank = tsvd_solve(A, b, problem.tau_svd)
    r0, r1 = residuals(problem, basis, c)
    return FitReport(c, r0, r1, smax, smin, basis.n_columns, rank)


def discrete_ck_norm(velocities, k=0, gradients=None):
    """``max |u|`` plus, for ``k=1``, ``max |grad u|`` (Frobenius)."""
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    u = np.asarray(velocities, dtype=float).reshape(-1, 2)
    value = float(np.linalg.norm(u, axis=1).max()) if len(u) else 0.0
    if k == 1:
        if gradients is None:
            raise ValueError("k=1 needs gradients")
        g = np.asarray(gradients, dtype=float).reshape(-1, 2, 2)
        value += float(np.linalg.norm(g, axis=(1, 2)).max()) if len(g) else 0.0
    return value


@dataclass(frozen=True)
class SweepRow:
    basis_size: int
    residual_c0: float
    residual_c1: float | None
    smax: float
    smin: float


def convergence_sweep(problem, domain, sizes, offset=None, hole_sources=True):
    """Fit ``problem`` with bases of increasing size on a shared geometry.

    Each entry of ``sizes`` is the number of Stokeslet locations per
    excluded region.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("no sizes given")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly ascending")
    table = []
    for n in sizes:
        basis = place_sources(domain, n, offset, hole_sources=hole_sources)
        rep = fit(problem, basis)
        table.append(SweepRow(n, rep.residual_c0, rep.residual_c1, rep.smax, rep.smin))
    return table


def sweep_to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["basis_size", "residual_c0", "residual_c1", "smax", "smin"])
    for row in table:
        w.writerow([row.basis_size, repr(row.residual_c0),
                    "" if row.residual_c1 is None else repr(row.residual_c1),
                    repr(row.smax), repr(row.smin)])
    return buf.getvalue()
