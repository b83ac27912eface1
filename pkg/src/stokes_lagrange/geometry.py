"""Discrete Jordan curves, planar domains with holes, and curve metrics.

Curves are closed polylines stored as ``(M, 2)`` arrays; the last node
connects back to the first.  Domains are an outer curve minus the closed
interiors of hole curves, with the control arc ``sigma`` given as
arc-length-fraction intervals on boundary components.  Component ``0`` is
the outer boundary, component ``k >= 1`` is ``holes[k - 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CurveNotInDomain,
    InvalidCurve,
    InvalidDomain,
    OnBoundary,
    SampleCountMismatch,
    TubeLeavesDomain,
)

MIN_SAMPLES = 16
MAX_SPACING_RATIO = 10.0
TOL_BOUNDARY = 1e-9  # relative to domain diameter
TUBE_LAYERS = (-1.0, -0.5, 0.0, 0.5, 1.0)
MAX_LAYER_CLIP = 0.5


def _shoelace(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(points):
    """True if two non-adjacent segments of the closed polyline meet."""
    p = points
    q = np.roll(points, -1, axis=0)
    m = len(p)
    scale = float(np.ptp(points, axis=0).max()) or 1.0
    eps = 1e-12 * scale * scale

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    i, j = np.triu_indices(m, k=2)
    keep = ~((i == 0) & (j == m - 1))
    i, j = i[keep], j[keep]
    a, b, c, d = p[i], q[i], p[j], q[j]
    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    proper = (o1 * o2 < -eps * eps) & (o3 * o4 < -eps * eps)
    if proper.any():
        return True

    def on_segment(a, b, c, o):
        lo = np.minimum(a, b) - 1e-12 * scale
        hi = np.maximum(a, b) + 1e-12 * scale
        inside = np.all((c >= lo) & (c <= hi), axis=-1)
        return (np.abs(o) <= eps) & inside

    touch = (
        on_segment(a, b, c, o1)
        | on_segment(a, b, d, o2)
        | on_segment(c, d, a, o3)
        | on_segment(c, d, b, o4)
    )
    return bool(touch.any())


def _point_segment_distance(x, p, q):
    """Distances from points ``x`` (N, 2) to segments ``p->q`` (S, 2); (N, S)."""
    d = q - p
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 > 0, len2, 1.0)
    rel = x[:, None, :] - p[None, :, :]
    s = np.clip(np.einsum("nsk,sk->ns", rel, d) / len2, 0.0, 1.0)
    foot = p[None, :, :] + s[..., None] * d[None, :, :]
    return np.linalg.norm(x[:, None, :] - foot, axis=-1)


def _crossings(x, poly):
    """Even-odd point-in-polygon for points ``x`` (N, 2)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    xa, ya = a[:, 0], a[:, 1]
    xb, yb = b[:, 0], b[:, 1]
    px = x[:, 0][:, None]
    py = x[:, 1][:, None]
    straddle = (ya > py) != (yb > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xa + (py - ya) * (xb - xa) / (yb - ya)
    hit = straddle & (px < xint)
    return (np.count_nonzero(hit, axis=1) % 2) == 1


class JordanCurve:
    """Closed simple polyline sampled from a map of the circle.

    Parameters
    ----------
    points : array_like, shape (M, 2)
        Nodes in order; the closing segment is implicit.
    check : bool
        Validate the invariants (sample count, simplicity, positive
        orientation, quasi-uniform spacing).  Intermediate curves produced
        by algorithms may skip individual checks.
    """

    def __init__(self, points, *, check=True, check_orientation=None,
                 check_spacing=None):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidCurve("curve points must have shape (M, 2)")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurve("curve points must be finite")
        pts.setflags(write=False)
        self._points = pts
        if check_orientation is None:
            check_orientation = check
        if check_spacing is None:
            check_spacing = check
        if check:
            self._validate(check_orientation, check_spacing)
        elif check_orientation or check_spacing:
            self._validate(check_orientation, check_spacing, simple=False)

    def _validate(self, orientation, spacing, simple=True):
        pts = self._points
        if len(pts) < MIN_SAMPLES:
            raise InvalidCurve(f"need at least {MIN_SAMPLES} samples, got {len(pts)}")
        seg = self.segment_lengths
        if np.any(seg <= 0):
            raise InvalidCurve("consecutive samples coincide")
        if spacing and seg.max() / seg.min() > MAX_SPACING_RATIO:
            raise InvalidCurve(
                f"spacing ratio {seg.max() / seg.min():.3g} exceeds {MAX_SPACING_RATIO}"
            )
        if orientation and _shoelace(pts) <= 0:
            raise InvalidCurve("curve must be positively oriented (counter-clockwise)")
        if simple and _segments_intersect(pts):
            raise InvalidCurve("curve is not simple")

    # constructors -----------------------------------------------------
    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0, m=128, phase=0.0):
        t = phase + 2 * np.pi * np.arange(m) / m
        c = np.asarray(center, dtype=float)
        return cls(c + radius * np.column_stack([np.cos(t), np.sin(t)]))

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), a=1.0, b=1.0, m=128, angle=0.0):
        t = 2 * np.pi * np.arange(m) / m
        local = np.column_stack([a * np.cos(t), b * np.sin(t)])
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        return cls(np.asarray(center, dtype=float) + local @ rot.T)

    @classmethod
    def polygon(cls, corners, m=64):
        """Densify a polygon to ``m`` nodes spread evenly in arc length."""
        corners = np.asarray(corners, dtype=float)
        return cls(_resample_closed(corners, m))

    # basic properties -------------------------------------------------
    @property
    def points(self):
        return self._points

    def __len__(self):
        return len(self._points)

    def __repr__(self):
        return f"JordanCurve(M={len(self)}, area={self.area:.6g})"

    @property
    def edges(self):
        return np.roll(self._points, -1, axis=0) - self._points

    @property
    def segment_lengths(self):
        return np.linalg.norm(self.edges, axis=1)

    @property
    def length(self):
        return float(self.segment_lengths.sum())

    @property
    def area(self):
        return _shoelace(self._points)

    @property
    def centroid(self):
        p = self._points
        q = np.roll(p, -1, axis=0)
        cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
        a = 0.5 * cross.sum()
        if a == 0:
            return p.mean(axis=0)
        cx = ((p[:, 0] + q[:, 0]) * cross).sum() / (6 * a)
        cy = ((p[:, 1] + q[:, 1]) * cross).sum() / (6 * a)
        return np.array([cx, cy])

    @property
    def diameter(self):
        p = self._points
        return float(np.max(np.linalg.norm(p[:, None] - p[None, :], axis=-1)))

    @property
    def spacing_ratio(self):
        seg = self.segment_lengths
        return float(seg.max() / seg.min())

    @property
    def tangents(self):
        """Unit tangents from central differences of the node sequence."""
        p = self._points
        d = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    @property
    def normals(self):
        """Outward unit normals (right of the tangent for CCW curves)."""
        t = self.tangents
        n = np.column_stack([t[:, 1], -t[:, 0]])
        return n if self.area >= 0 else -n

    @property
    def node_weights(self):
        """Trapezoid arc-length weights; they sum to the curve length."""
        seg = self.segment_lengths
        return 0.5 * (seg + np.roll(seg, 1))

    @property
    def arc_fractions(self):
        """Arc-length fraction in [0, 1) of each node, measured from node 0."""
        seg = self.segment_lengths
        return np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / seg.sum()

    # derived curves ---------------------------------------------------
    def reversed(self):
        return JordanCurve(self._points[::-1], check=False)

    def shifted(self, k):
        return JordanCurve(np.roll(self._points, -k, axis=0), check=False)

    def translated(self, v):
        return JordanCurve(self._points + np.asarray(v, dtype=float), check=False)

    def resampled(self, m=None):
        """Re-distribute nodes uniformly in arc length, starting at node 0."""
        return JordanCurve(_resample_closed(self._points, m or len(self)), check=False)

    def point_at(self, fractions):
        """Positions at arc-length fractions along the polyline."""
        return _interp_closed(self._points, np.asarray(fractions, dtype=float))

    def to_json(self):
        return {"points": self._points.tolist()}

    @classmethod
    def from_json(cls, obj, check=True):
        return cls(obj["points"], check=check)


def _closed_cumlen(points):
    closed = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    return closed, np.concatenate([[0.0], np.cumsum(seg)])


def _interp_closed(points, fractions):
    closed, cum = _closed_cumlen(points)
    s = np.mod(fractions, 1.0) * cum[-1]
    x = np.interp(s, cum, closed[:, 0])
    y = np.interp(s, cum, closed[:, 1])
    return np.column_stack([x, y])


def _resample_closed(points, m):
    return _interp_closed(points, np.arange(m) / m)


def signed_area(curve):
    """Shoelace area; positive for counter-clockwise curves."""
    pts = curve.points if isinstance(curve, JordanCurve) else np.asarray(curve, float)
    return _shoelace(pts)


@dataclass(frozen=True)
class SigmaArc:
    """Interval ``[t0, t1)`` of arc-length fraction on one component.

    ``t1 < t0`` wraps through the component's first node.
    """

    component: int
    t0: float
    t1: float

    def mask(self, fractions):
        f = np.mod(np.asarray(fractions, dtype=float), 1.0)
        if self.t0 <= self.t1:
            return (f >= self.t0) & (f < self.t1)
        return (f >= self.t0) | (f < self.t1)

    def to_json(self):
        return {"component": self.component, "t0": self.t0, "t1": self.t1}


@dataclass(frozen=True)
class CollocationSet:
    """Points with positive quadrature weights and optional unit normals.

    ``tags`` is free-form per-point metadata: the layer offset for tubes,
    the boundary component for boundary quadratures.
    """

    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray | None = None
    tags: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ValueError("weights and points differ in length")
        if np.any(w <= 0):
            raise ValueError("collocation weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.normals is not None:
            n = np.asarray(self.normals, dtype=float).reshape(-1, 2)
            if len(n) != len(pts):
                raise ValueError("normals and points differ in length")
            if not np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9):
                raise ValueError("normals must be unit vectors")
            object.__setattr__(self, "normals", n)
        if self.tags is not None:
            object.__setattr__(self, "tags", np.asarray(self.tags).reshape(-1))

    def __len__(self):
        return len(self.points)

    def subset(self, mask):
        return CollocationSet(
            self.points[mask],
            self.weights[mask],
            None if self.normals is None else self.normals[mask],
            None if self.tags is None else self.tags[mask],
        )

    @property
    def spacing(self):
        return float(np.mean(self.weights))


@dataclass(frozen=True)
class Domain:
    """Bounded planar domain: interior of ``outer`` minus closed hole interiors."""

    outer: JordanCurve
    holes: tuple = ()
    sigma: tuple = ()
    allow_full_sigma: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        object.__setattr__(
            self,
            "sigma",
            tuple(s if isinstance(s, SigmaArc) else SigmaArc(**s) for s in self.sigma),
        )
        self._validate()

    def _validate(self):
        outer = self.outer
        for k, h in enumerate(self.holes):
            if not np.all(_crossings(h.points, outer.points)):
                raise InvalidDomain(f"hole {k} is not inside the outer boundary")
            if _point_segment_distance(h.points, outer.points, np.roll(outer.points, -1, 0)).min() <= 0:
                raise InvalidDomain(f"hole {k} touches the outer boundary")
            for j, g in enumerate(self.holes[:k]):
                if np.any(_crossings(h.points, g.points)) or np.any(
                    _crossings(g.points, h.points)
                ):
                    raise InvalidDomain(f"holes {j} and {k} overlap")
                seg = _point_segment_distance(h.points, g.points, np.roll(g.points, -1, 0))
                if seg.min() <= 0:
                    raise InvalidDomain(f"holes {j} and {k} touch")
        ncomp = 1 + len(self.holes)
        for s in self.sigma:
            if not 0 <= s.component < ncomp:
                raise InvalidDomain(f"sigma component {s.component} out of range")
            if not (0 <= s.t0 < 1 and 0 <= s.t1 <= 1):
                raise InvalidDomain("sigma parameters must lie in [0, 1)")
        if self.sigma:
            frac = self.boundary_quadrature()
            in_sigma = self.sigma_mask(frac)
            if not in_sigma.any():
                raise InvalidDomain("sigma is empty")
            if in_sigma.all() and not self.allow_full_sigma:
                raise InvalidDomain("sigma covers the whole boundary")

    # structure --------------------------------------------------------
    @property
    def components(self):
        return (self.outer, *self.holes)

    @property
    def diameter(self):
        return self.outer.diameter

    @property
    def tol_boundary(self):
        return TOL_BOUNDARY * self.diameter

    @property
    def area(self):
        return self.outer.area - sum(h.area for h in self.holes)

    def _all_segments(self):
        if "segments" not in self._cache:
            p = np.vstack([c.points for c in self.components])
            q = np.vstack([np.roll(c.points, -1, axis=0) for c in self.components])
            self._cache["segments"] = (p, q)
        return self._cache["segments"]

    def hole_points(self):
        """A representative interior point for each hole."""
        if "hole_points" not in self._cache:
            self._cache["hole_points"] = [interior_point(h) for h in self.holes]
        return self._cache["hole_points"]

    # queries ----------------------------------------------------------
    def boundary_distance(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p, q = self._all_segments()
        out = np.empty(len(x))
        for start in range(0, len(x), 2048):
            out[start:start + 2048] = _point_segment_distance(x[start:start + 2048], p, q).min(axis=1)
        return out

    def inside(self, x, margin=0.0):
        """Vectorised membership; points within ``tol_boundary + margin`` of
        the boundary count as outside."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = _crossings(x, self.outer.points)
        for h in self.holes:
            ok &= ~_crossings(x, h.points)
        ok &= self.boundary_distance(x) > self.tol_boundary + margin
        return ok

    def sigma_mask(self, quad):
        """Boolean mask of boundary quadrature nodes lying on sigma."""
        comp = quad.tags
        frac = quad.fractions
        mask = np.zeros(len(comp), dtype=bool)
        for s in self.sigma:
            mask |= (comp == s.component) & s.mask(frac)
        return mask

    def boundary_quadrature(self, n_gauss=4):
        """Gauss-Legendre nodes on every boundary segment.

        Normals point out of the domain (into each hole on hole
        components).  The returned set carries ``tags`` (component index)
        and an extra ``fractions`` attribute with each node's arc-length
        fraction on its component.
        """
        key = ("quad", n_gauss)
        if key in self._cache:
            return self._cache[key]
        xi, wi = np.polynomial.legendre.leggauss(n_gauss)
        pts, wts, nrm, tag, frac = [], [], [], [], []
        for k, c in enumerate(self.components):
            p = c.points
            e = c.edges
            seg = c.segment_lengths
            start = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
            u = (xi + 1) / 2
            pts.append((p[:, None, :] + u[None, :, None] * e[:, None, :]).reshape(-1, 2))
            wts.append((seg[:, None] * wi[None, :] / 2).reshape(-1))
            n = np.column_stack([e[:, 1], -e[:, 0]]) / seg[:, None]
            if k > 0:
                n = -n
            nrm.append(np.repeat(n, n_gauss, axis=0))
            tag.append(np.full(len(p) * n_gauss, k))
            frac.append(((start[:, None] + u[None, :] * seg[:, None]) / seg.sum()).reshape(-1))
        quad = _BoundaryQuadrature(
            np.vstack(pts), np.concatenate(wts), np.vstack(nrm), np.concatenate(tag)
        )
        object.__setattr__(quad, "fractions", np.concatenate(frac))
        self._cache[key] = quad
        return quad

    def sigma_points(self, resolution):
        """Arc-length-uniform samples of each sigma arc.

        Returns ``(arc_index, s, points)`` where ``s`` is the component
        arc-length fraction of each sample; ``resolution + 1`` samples per
        arc, endpoints included.
        """
        idx, ss, pts = [], [], []
        for a, arc in enumerate(self.sigma):
            comp = self.components[arc.component]
            span = (arc.t1 - arc.t0) % 1.0 or 1.0
            s = arc.t0 + np.arange(resolution + 1) * (span / resolution)
            idx.append(np.full(len(s), a))
            ss.append(np.mod(s, 1.0))
            pts.append(comp.point_at(s))
        return np.concatenate(idx), np.concatenate(ss), np.vstack(pts)

    # serialisation ----------------------------------------------------
    def to_json(self):
        return {
            "outer": self.outer.to_json(),
            "holes": [h.to_json() for h in self.holes],
            "sigma": [s.to_json() for s in self.sigma],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            JordanCurve.from_json(obj["outer"]),
            tuple(JordanCurve.from_json(h) for h in obj.get("holes", [])),
            tuple(SigmaArc(**s) for s in obj.get("sigma", [])),
        )


class _BoundaryQuadrature(CollocationSet):
    pass


def interior_point(curve):
    """A point well inside ``curve`` (maximises distance to the boundary
    over a coarse lattice, seeded with the centroid)."""
    pts = curve.points
    c = curve.centroid
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], 41), np.linspace(lo[1], hi[1], 41))
    cand = np.vstack([c[None, :], np.column_stack([gx.ravel(), gy.ravel()])])
    cand = cand[_crossings(cand, pts)]
    if len(cand) == 0:
        raise InvalidCurve("could not locate an interior point")
    dist = _point_segment_distance(cand, pts, np.roll(pts, -1, axis=0)).min(axis=1)
    # prefer the centroid when it is nearly as deep as the best lattice point
    if np.array_equal(cand[0], c) and dist[0] >= 0.9 * dist.max():
        return c
    return cand[int(np.argmax(dist))]


def contains(domain, x):
    """Whether ``x`` lies in the domain; raises :class:`OnBoundary` when
    ``x`` is within ``tol_boundary`` of any boundary segment."""
    x = np.asarray(x, dtype=float).reshape(1, 2)
    if domain.boundary_distance(x)[0] <= domain.tol_boundary:
        raise OnBoundary(f"point {x[0].tolist()} lies on the boundary")
    return bool(domain.inside(x)[0])


def enclosed_holes(domain, curve):
    """Indices of holes whose representative point lies inside ``curve``."""
    if not np.all(domain.inside(curve.points)):
        raise CurveNotInDomain("curve is not contained in the domain")
    reps = domain.hole_points()
    if not reps:
        return set()
    hit = _crossings(np.array(reps), curve.points)
    return {k for k, h in enumerate(hit) if h}


def tube(curve, delta, domain):
    """Collocation points on offset layers at ``(0, +-delta/2, +-delta)``
    along the curve normals, clipped to the domain.

    Raises
    ------
    TubeLeavesDomain
        When clipping removes more than half of the nodes of any layer.
    """
    if not delta > 0:
        raise ValueError("tube thickness delta must be positive")
    base = curve.points
    nrm = curve.normals
    pts, wts, nrms, tags = [], [], [], []
    for f in TUBE_LAYERS:
        layer = base + f * delta * nrm
        closed = np.vstack([layer, layer[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        w = 0.5 * (seg + np.roll(seg, 1))
        pts.append(layer)
        wts.append(w)
        nrms.append(nrm)
        tags.append(np.full(len(layer), f * delta))
    pts = np.vstack(pts)
    tags = np.concatenate(tags)
    keep = domain.inside(pts)
    m = len(base)
    for k, f in enumerate(TUBE_LAYERS):
        lost = 1.0 - keep[k * m:(k + 1) * m].mean()
        if lost > MAX_LAYER_CLIP:
            raise TubeLeavesDomain(
                f"layer at offset {f * delta:+.4g} loses {lost:.0%} of its nodes"
            )
    full = CollocationSet(pts, np.concatenate(wts), np.vstack(nrms), tags)
    return full.subset(keep)


def tube_unclipped(curve, delta, domain):
    """Like :func:`tube` but never raises; used for diagnostics."""
    base = curve.points
    nrm = curve.normals
    pts = np.vstack([base + f * delta * nrm for f in TUBE_LAYERS])
    return pts[domain.inside(pts)]


def _polyline_distance(x, curve_pts):
    return _point_segment_distance(x, curve_pts, np.roll(curve_pts, -1, axis=0)).min(axis=1)


def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between sample nodes and polylines."""
    pa = a.points if isinstance(a, JordanCurve) else np.asarray(a, float)
    pb = b.points if isinstance(b, JordanCurve) else np.asarray(b, float)
    return float(max(_polyline_distance(pa, pb).max(), _polyline_distance(pb, pa).max()))


def _periodic_derivative(g, order):
    m = g.shape[-2]
    for _ in range(order):
        g = (np.roll(g, -1, axis=-2) - np.roll(g, 1, axis=-2)) * (m / 2.0)
    return g


def parametric_distance(a, b, k=0):
    """Discrete C^k gap between two parameterisations.

    Minimises, over cyclic shifts and both orientations of ``b``, the sum
    for orders ``0..k`` of the max-over-nodes norm of the periodic central
    difference (parameter step ``1/M``) of the pointwise gap.
    """
    pa = a.points if isinstance(a, JordanCurve) else np.asarray(a, float)
    pb = b.points if isinstance(b, JordanCurve) else np.asarray(b, float)
    if pa.shape != pb.shape:
        raise SampleCountMismatch(f"{len(pa)} vs {len(pb)} samples")
    m = len(pa)
    idx = (np.arange(m)[None, :] + np.arange(m)[:, None]) % m
    best = np.inf
    for cand in (pb, pb[::-1]):
        gap = pa[None, :, :] - cand[idx]
        total = np.zeros(m)
        for order in range(k + 1):
            d = _periodic_derivative(gap, order)
            total += np.linalg.norm(d, axis=-1).max(axis=-1)
        best = min(best, float(total.min()))
    return best
