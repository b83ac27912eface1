"""Singular Stokes solutions placed outside the flow domain.

Every column of a :class:`StokesBasis` is an exact solution of
``-lap u + grad p = 0, div u = 0`` away from its pole, so any coefficient
vector defines an exact Stokes field in the domain.  Two element kinds:

* Stokeslet at ``y`` with unit force ``e_j`` (two columns per location)::

      u_i = (1/4pi) (-delta_ij ln r + r_i r_j / r^2),  p = r_j / (2 pi r^2)

* point source at ``y`` (one column): ``u = r / (2 pi r^2)``, ``p = 0``.

with ``r = x - y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationAtSingularity, OffsetTooLarge, TooCloseToSingularity
from .geometry import Domain, _crossings, _point_segment_distance

STOKESLET = "stokeslet"
SOURCE = "source"
EXTERIOR = -1
SINGULAR_TOL = 1e-12

_C4 = 1.0 / (4.0 * np.pi)
_C2 = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class StokesBasis:
    """Pole locations, their kinds and the excluded region each sits in.

    ``regions[k]`` is ``-1`` for poles outside the outer boundary and the
    hole index otherwise.
    """

    locations: np.ndarray
    kinds: tuple
    regions: tuple
    source_offset: float = 0.0
    domain: Domain | None = field(default=None, compare=False, repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float).reshape(-1, 2)
        loc.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "regions", tuple(int(r) for r in self.regions))
        if not (len(self.kinds) == len(self.regions) == len(loc)):
            raise ValueError("locations, kinds and regions differ in length")
        bad = set(self.kinds) - {STOKESLET, SOURCE}
        if bad:
            raise ValueError(f"unknown element kinds {bad}")
        cols_loc, cols_kind = [], []
        for y, kind in zip(loc, self.kinds):
            if kind == STOKESLET:
                cols_loc += [y, y]
                cols_kind += [0, 1]
            else:
                cols_loc.append(y)
                cols_kind.append(2)
        object.__setattr__(self, "_col_loc", np.array(cols_loc).reshape(-1, 2))
        object.__setattr__(self, "_col_kind", np.array(cols_kind, dtype=int))

    @property
    def n_columns(self):
        return len(self._col_kind)

    @property
    def n_elements(self):
        return len(self.kinds)

    def __len__(self):
        return self.n_columns

    # column matrices --------------------------------------------------
    def _offsets(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = x[:, None, :] - self._col_loc[None, :, :]
        r2 = np.einsum("pck,pck->pc", r, r)
        if self.n_columns and np.sqrt(r2.min()) < SINGULAR_TOL:
            raise EvaluationAtSingularity("evaluation point coincides with a pole")
        return r, r2

    def velocity_matrix(self, x):
        """Column velocities at ``x``; shape ``(P, 2, ncols)``."""
        r, r2 = self._offsets(x)
        kind = self._col_kind
        st = kind < 2
        j = np.where(st, kind, 0)
        logr = 0.5 * np.log(r2)
        rj = np.take_along_axis(r, j[None, :, None], axis=2)[..., 0]
        out = np.empty((r.shape[0], 2, r.shape[1]))
        for i in range(2):
            stokes = _C4 * (-(i == j).astype(float) * logr + r[..., i] * rj / r2)
            src = _C2 * r[..., i] / r2
            out[:, i, :] = np.where(st, stokes, src)
        return out

    def gradient_matrix(self, x):
        """Column velocity gradients ``d u_i / d x_k``; shape ``(P, 2, 2, ncols)``."""
        r, r2 = self._offsets(x)
        kind = self._col_kind
        st = kind < 2
        j = np.where(st, kind, 0)
        rj = np.take_along_axis(r, j[None, :, None], axis=2)[..., 0]
        r4 = r2 * r2
        out = np.empty((r.shape[0], 2, 2, r.shape[1]))
        for i in range(2):
            for k in range(2):
                dik = float(i == k)
                stokes = _C4 * (
                    -(i == j).astype(float) * r[..., k] / r2
                    + (dik * rj + r[..., i] * (j == k)) / r2
                    - 2.0 * r[..., i] * rj * r[..., k] / r4
                )
                src = _C2 * (dik / r2 - 2.0 * r[..., i] * r[..., k] / r4)
                out[:, i, k, :] = np.where(st, stokes, src)
        return out

    def pressure_matrix(self, x):
        """Column pressures (no gauge shift); shape ``(P, ncols)``."""
        r, r2 = self._offsets(x)
        kind = self._col_kind
        st = kind < 2
        j = np.where(st, kind, 0)
        rj = np.take_along_axis(r, j[None, :, None], axis=2)[..., 0]
        return np.where(st, _C2 * rj / r2, 0.0)

    # gauge ------------------------------------------------------------
    def gauge_points(self, n=64):
        """Midpoints of a background lattice clipped to the domain."""
        if self.domain is None:
            raise ValueError("pressure gauge needs the basis domain")
        key = ("gauge", n)
        if key not in self._cache:
            pts = self.domain.outer.points
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            h = (hi - lo) / n
            gx, gy = np.meshgrid(lo[0] + h[0] * (np.arange(n) + 0.5),
                                 lo[1] + h[1] * (np.arange(n) + 0.5))
            grid = np.column_stack([gx.ravel(), gy.ravel()])
            self._cache[key] = grid[self.domain.inside(grid)]
        return self._cache[key]

    # serialisation ----------------------------------------------------
    def to_json(self):
        return {
            "locations": self.locations.tolist(),
            "kinds": list(self.kinds),
            "regions": list(self.regions),
            "source_offset": self.source_offset,
        }

    @classmethod
    def from_json(cls, obj, domain=None):
        return cls(obj["locations"], obj["kinds"], obj["regions"],
                   obj.get("source_offset", 0.0), domain)


def _coeffs(basis, c):
    c = np.asarray(c, dtype=float).reshape(-1)
    if len(c) != basis.n_columns:
        raise ValueError(f"expected {basis.n_columns} coefficients, got {len(c)}")
    return c


def _single(x, arr):
    return arr[0] if np.asarray(x).ndim == 1 else arr


def eval_velocity(basis, c, x):
    """Velocity of the combination ``c`` at ``x`` (shape (2,) or (P, 2))."""
    c = _coeffs(basis, c)
    return _single(x, basis.velocity_matrix(x) @ c)


def eval_gradient(basis, c, x):
    """Velocity gradient ``G[i, k] = d u_i / d x_k``."""
    c = _coeffs(basis, c)
    return _single(x, basis.gradient_matrix(x) @ c)


def pressure_mean(basis, c):
    """Lattice average of the raw pressure over the domain."""
    c = _coeffs(basis, c)
    return float((basis.pressure_matrix(basis.gauge_points()) @ c).mean())


def eval_pressure(basis, c, x, gauge=False):
    """Pressure at ``x``; ``gauge=True`` subtracts the domain average so the
    reported field has zero mean over the domain."""
    c = _coeffs(basis, c)
    p = basis.pressure_matrix(x) @ c
    if gauge:
        p = p - pressure_mean(basis, c)
    return _single(x, p)


def stokes_residual(basis, c, x, h=1e-4):
    """Central-difference check of the Stokes system at ``x``.

    Returns ``(momentum, divergence)``: the 2-vector ``-lap_h u + grad_h p``
    and the scalar ``div_h u``.  Vectorised inputs give ``(P, 2)`` and
    ``(P,)``.
    """
    c = _coeffs(basis, c)
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    if basis.n_columns:
        d = np.linalg.norm(xs[:, None, :] - basis.locations[None], axis=-1).min()
        if d < 10 * h:
            raise TooCloseToSingularity(f"point within {d:.3g} of a pole (need {10 * h:.3g})")
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    u0 = basis.velocity_matrix(xs) @ c
    uxp = basis.velocity_matrix(xs + ex) @ c
    uxm = basis.velocity_matrix(xs - ex) @ c
    uyp = basis.velocity_matrix(xs + ey) @ c
    uym = basis.velocity_matrix(xs - ey) @ c
    lap = (uxp + uxm + uyp + uym - 4.0 * u0) / (h * h)
    P = basis.pressure_matrix
    gp = np.column_stack([(P(xs + ex) @ c - P(xs - ex) @ c) / (2 * h),
                          (P(xs + ey) @ c - P(xs - ey) @ c) / (2 * h)])
    mom = -lap + gp
    div = (uxp[:, 0] - uxm[:, 0] + uyp[:, 1] - uym[:, 1]) / (2 * h)
    if np.asarray(x).ndim == 1:
        return mom[0], float(div[0])
    return mom, div


def single_element(location, kind=STOKESLET, region=EXTERIOR):
    """One-element basis; handy for experiments and tests."""
    return StokesBasis(np.asarray(location, float).reshape(1, 2), (kind,), (region,))


def default_offset(domain):
    """Quarter of the local feature size: hole inradius or outer diameter / 4."""
    sizes = [domain.diameter / 4.0]
    for h, p in zip(domain.holes, domain.hole_points()):
        q = np.roll(h.points, -1, axis=0)
        sizes.append(_point_segment_distance(np.asarray(p)[None], h.points, q).min())
    return 0.25 * sizes[0], [0.25 * s for s in sizes[1:]]


def place_sources(domain, per_region_counts, offset=None, hole_sources=True):
    """Stokeslets on offset curves outside the domain.

    Parameters
    ----------
    domain : Domain
    per_region_counts : int or sequence of int
        Number of Stokeslet locations outside the outer boundary, then in
        each hole.  A single integer is used for every region.
    offset : float or sequence of float, optional
        Distance of the offset curves from the boundary; defaults to a
        quarter of the local feature size.
    hole_sources : bool
        Add one point source per hole (carries net flux across that hole).
    """
    nreg = 1 + len(domain.holes)
    counts = [int(per_region_counts)] * nreg if np.ndim(per_region_counts) == 0 \
        else [int(n) for n in per_region_counts]
    if len(counts) != nreg:
        raise ValueError(f"need {nreg} region counts, got {len(counts)}")
    if offset is None:
        outer_off, hole_off = default_offset(domain)
        offsets = [outer_off, *hole_off]
    elif np.ndim(offset) == 0:
        offsets = [float(offset)] * nreg
    else:
        offsets = [float(o) for o in offset]
    if any(not o > 0 for o in offsets):
        raise OffsetTooLarge("source offset must be positive")

    locs, kinds, regions = [], [], []
    for k, (comp, n, off) in enumerate(zip(domain.components, counts, offsets)):
        if n <= 0:
            continue
        frac = np.arange(n) / n
        base = comp.point_at(frac)
        nrm = _interp_normals(comp, frac)
        sign = 1.0 if k == 0 else -1.0
        y = base + sign * off * nrm
        _check_placement(domain, k, y, off)
        locs.append(y)
        kinds += [STOKESLET] * n
        regions += [EXTERIOR if k == 0 else k - 1] * n
    if hole_sources:
        for k, p in enumerate(domain.hole_points()):
            locs.append(np.asarray(p)[None])
            kinds.append(SOURCE)
            regions.append(k)
    loc = np.vstack(locs) if locs else np.zeros((0, 2))
    return StokesBasis(loc, tuple(kinds), tuple(regions), float(offsets[0]), domain)


def _interp_normals(curve, frac):
    nrm = curve.normals
    cum = np.concatenate([curve.arc_fractions, [1.0]])
    nn = np.vstack([nrm, nrm[:1]])
    out = np.column_stack([np.interp(frac, cum, nn[:, 0]), np.interp(frac, cum, nn[:, 1])])
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _check_placement(domain, component, y, offset):
    comp = domain.components[component]
    inside = _crossings(y, comp.points)
    if component == 0 and inside.any():
        raise OffsetTooLarge("exterior source falls inside the outer boundary")
    if component > 0 and not inside.all():
        raise OffsetTooLarge(f"source leaves hole {component - 1}")
    p, q = domain._all_segments()
    dist = _point_segment_distance(y, p, q).min(axis=1)
    if dist.min() < 0.5 * offset:
        raise OffsetTooLarge(
            f"source within {dist.min():.3g} of the boundary (offset {offset:.3g})"
        )
