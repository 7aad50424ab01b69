"""Measure oracles: exact ball masses and finite support nets.

All balls are closed and use the max metric, so in 1-D a ball is the interval
``[x - r, x + r]`` and in 2-D it is an axis-aligned square.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, ToleranceError
from .rangeindex import RangeSumTree

DEFAULT_TOL = 1e-9
MAX_DEPTH = 200


class MeasureOracle:
    """Common interface for finite, fully supported Borel measures.

    Subclasses provide ``ball_masses`` (vectorized over centers) and
    ``support_net``. Attributes ``dim``, ``total_mass``, ``lower`` and
    ``upper`` (bounding box of the support) are set by the constructor.
    """

    dim: int = 1
    total_mass: float = 1.0
    lower: np.ndarray
    upper: np.ndarray

    @property
    def support_diameter(self) -> float:
        """Diameter of the support in the max metric."""
        return float(np.max(self.upper - self.lower))

    def ball_masses(self, centers, radius) -> np.ndarray:
        raise NotImplementedError

    def ball_mass(self, center, radius: float) -> float:
        """Mass of the closed ball ``B(center, radius)``."""
        c = np.asarray(center, dtype=float).reshape(1, -1) if self.dim > 1 else np.atleast_1d(
            np.asarray(center, dtype=float))
        return float(self.ball_masses(c, radius)[0])

    def support_net(self, mesh: float) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        """JSON-serializable description used for provenance."""
        raise NotImplementedError

    def fingerprint(self) -> str:
        blob = json.dumps(self.config(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _check_radius(self, radius):
        r = np.asarray(radius, dtype=float)
        if np.any(~(r > 0)) or np.any(~np.isfinite(r)):
            raise ArgumentError("radius must be finite and positive")
        return r


def _check_mesh(mesh: float) -> float:
    mesh = float(mesh)
    if not (mesh > 0 and np.isfinite(mesh)):
        raise ArgumentError("mesh must be finite and positive")
    return mesh


def _resolution(width) -> np.ndarray:
    # Snap the tolerance to a dyadic ladder so nearby radii share a partition.
    width = np.asarray(width, dtype=float)
    return DEFAULT_TOL * np.exp2(np.floor(np.log2(width)))


class Lebesgue(MeasureOracle):
    """Lebesgue measure on a closed interval (default ``[0, 1]``)."""

    def __init__(self, a: float = 0.0, b: float = 1.0):
        if not b > a:
            raise ArgumentError("need a < b")
        self.a, self.b = float(a), float(b)
        self.dim = 1
        self.total_mass = self.b - self.a
        self.lower = np.array([self.a])
        self.upper = np.array([self.b])

    def cdf(self, y) -> np.ndarray:
        return np.clip(np.asarray(y, dtype=float), self.a, self.b) - self.a

    def interval_mass(self, lo, hi) -> np.ndarray:
        lo = np.clip(np.asarray(lo, dtype=float), self.a, self.b)
        hi = np.clip(np.asarray(hi, dtype=float), self.a, self.b)
        return np.maximum(hi - lo, 0.0)

    def ball_masses(self, centers, radius) -> np.ndarray:
        r = self._check_radius(radius)
        x = np.asarray(centers, dtype=float).reshape(-1)
        return self.interval_mass(x - r, x + r)

    def support_net(self, mesh: float) -> np.ndarray:
        mesh = _check_mesh(mesh)
        k = int(np.ceil(self.total_mass / mesh)) + 1
        return np.linspace(self.a, self.b, max(k, 2))

    def net_cells(self, accept: Callable) -> tuple[np.ndarray, np.ndarray]:
        """Dyadic cells of the interval, bisected until ``accept(lo, hi)`` holds."""
        return _refine(np.array([self.a]), np.array([self.b - self.a]), accept,
                       lambda lo, w: (np.stack([lo, lo + w / 2], axis=1).ravel(),
                                      np.repeat(w / 2, 2)), 0.0, 1.0)

    def config(self) -> dict:
        return {"kind": "lebesgue", "interval": [self.a, self.b]}


@dataclass(frozen=True)
class Branch:
    """One similarity ``y -> ratio * y + shift`` carrying probability ``prob``."""

    ratio: float
    shift: float
    prob: float


class SelfSimilarMeasure(MeasureOracle):
    """Invariant measure of a 1-D IFS of similarities on ``[0, 1]``.

    The images ``[shift, shift + ratio]`` must be pairwise disjoint and lie in
    ``[0, 1]``. Ball masses come from descending the cylinder tree from both
    endpoints; a cylinder still straddling an endpoint once its width drops
    below ``tol * r`` is attributed by its midpoint.

    Parameters
    ----------
    branches : sequence of (ratio, shift, prob)

    Examples
    --------
    >>> mu = SelfSimilarMeasure([(1/3, 0, 0.25), (1/3, 2/3, 0.75)])
    >>> round(mu.ball_mass(1.0, 1/9), 12)
    0.5625
    """

    def __init__(self, branches: Sequence):
        bs = [b if isinstance(b, Branch) else Branch(*map(float, b)) for b in branches]
        if len(bs) < 2:
            raise ArgumentError("need at least two branches")
        bs.sort(key=lambda b: b.shift)
        for b in bs:
            if not (0 < b.ratio < 1 and 0 < b.prob < 1):
                raise ArgumentError(f"invalid branch {b}")
            if b.shift < 0 or b.shift + b.ratio > 1 + 1e-15:
                raise ArgumentError(f"branch {b} does not map [0,1] into itself")
        for left, right in zip(bs, bs[1:]):
            if not right.shift > left.shift + left.ratio:
                raise ArgumentError("branch images must be disjoint")
        total = sum(b.prob for b in bs)
        if abs(total - 1) > 1e-12:
            raise ArgumentError(f"probabilities sum to {total}, not 1")
        self.branches = tuple(bs)
        self.ratios = np.array([b.ratio for b in bs])
        self.shifts = np.array([b.shift for b in bs])
        self.probs = np.array([b.prob for b in bs])
        self._cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        self._cum[-1] = 1.0
        self.dim = 1
        self.total_mass = 1.0
        # Attractor hull: fixed points of the outermost maps.
        lo = bs[0].shift / (1 - bs[0].ratio)
        hi = bs[-1].shift / (1 - bs[-1].ratio)
        self.lower = np.array([lo])
        self.upper = np.array([hi])

    def _descend(self, y, eps, closed: bool) -> np.ndarray:
        """Mass of ``(-inf, y]`` (``closed``) or ``(-inf, y)``, resolved to width ``eps``."""
        y = np.array(y, dtype=float, copy=True).reshape(-1)
        eps = np.broadcast_to(np.asarray(eps, dtype=float), y.shape)
        acc = np.zeros_like(y)
        scale = np.ones_like(y)
        width = np.ones_like(y)
        active = np.arange(len(y))
        ends = self.shifts + self.ratios
        for _ in range(MAX_DEPTH):
            if len(active) == 0:
                return acc
            yy = y[active]
            j = np.searchsorted(self.shifts, yy, side="right") - 1
            jc = np.clip(j, 0, None)
            inside = (j >= 0) & (yy < ends[jc])
            done = ~inside
            # Finished: everything up to and including branch j lies left of y.
            acc[active[done]] += scale[active[done]] * np.where(j[done] >= 0, self._cum[jc[done] + 1], 0.0)
            ia = active[inside]
            ji = jc[inside]
            acc[ia] += scale[ia] * self._cum[ji]
            scale[ia] *= self.probs[ji]
            width[ia] *= self.ratios[ji]
            y[ia] = (yy[inside] - self.shifts[ji]) / self.ratios[ji]
            fine = width[ia] < eps[ia]
            if fine.any():
                fi = ia[fine]
                half = y[fi] >= 0.5 if closed else y[fi] > 0.5
                acc[fi] += np.where(half, scale[fi], 0.0)
            active = ia[~fine]
        if len(active):
            raise ToleranceError("cylinder descent exceeded the depth budget",
                                 float(np.max(scale[active])))
        return acc

    def cdf(self, y, eps: float | None = None) -> np.ndarray:
        """Mass of ``(-inf, y]`` resolved to absolute width ``eps``."""
        if eps is None:
            eps = DEFAULT_TOL
        return self._descend(y, eps, closed=True)

    def interval_mass(self, lo, hi) -> np.ndarray:
        """Mass of the closed interval ``[lo, hi]``."""
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        shape = lo.shape
        lo, hi = lo.reshape(-1), hi.reshape(-1)
        out = np.zeros(lo.shape)
        ok = hi > lo
        if ok.any():
            eps = _resolution(hi[ok] - lo[ok])
            out[ok] = self._descend(hi[ok], eps, True) - self._descend(lo[ok], eps, False)
        eq = hi == lo
        # Non-atomic: degenerate intervals carry no mass.
        out[eq] = 0.0
        return np.clip(out, 0.0, 1.0).reshape(shape)

    def ball_masses(self, centers, radius) -> np.ndarray:
        r = self._check_radius(radius)
        x = np.asarray(centers, dtype=float).reshape(-1)
        x, r = np.broadcast_arrays(x, r)
        eps = _resolution(r)
        m = self._descend(x + r, eps, True) - self._descend(x - r, eps, False)
        return np.clip(m, 0.0, 1.0)

    def net_cells(self, accept: Callable) -> tuple[np.ndarray, np.ndarray]:
        """Hulls of cylinders, refined until ``accept(lo, hi)`` holds.

        Hull endpoints are images of the attractor's extreme points, so they
        belong to the support.
        """
        a, b = float(self.lower[0]), float(self.upper[0])

        def split(lefts, widths):
            return ((lefts[:, None] + widths[:, None] * self.shifts[None, :]).ravel(),
                    (widths[:, None] * self.ratios[None, :]).ravel())

        return _refine(np.array([0.0]), np.array([1.0]), accept, split, a, b)

    def support_net(self, mesh: float) -> np.ndarray:
        """Endpoints of cylinder hulls refined to width ``<= mesh``."""
        mesh = _check_mesh(mesh)
        lo, hi = self.net_cells(lambda u, v: v - u <= mesh * (1 + 1e-12))
        return np.unique(np.concatenate([lo, hi]))

    def config(self) -> dict:
        return {"kind": "ifs1d", "branches": [[b.ratio, b.shift, b.prob] for b in self.branches]}


def _refine(lefts, widths, accept, split, a, b, max_depth: int = 96):
    """Refine cells ``left + width * [a, b]`` until ``accept`` holds for each."""
    out_lo, out_hi = [], []
    for _ in range(max_depth):
        if len(lefts) == 0:
            return np.concatenate(out_lo), np.concatenate(out_hi)
        lo = lefts + widths * a
        hi = lefts + widths * b
        ok = np.asarray(accept(lo, hi), dtype=bool)
        out_lo.append(lo[ok])
        out_hi.append(hi[ok])
        lefts, widths = split(lefts[~ok], widths[~ok])
    raise ToleranceError("support net refinement did not converge", float(np.max(widths)))


def cantor_measure(p: float = 0.5) -> SelfSimilarMeasure:
    """Middle-thirds Cantor measure with weights ``(p, 1 - p)``."""
    return SelfSimilarMeasure([(1 / 3, 0.0, p), (1 / 3, 2 / 3, 1 - p)])


class EmpiricalMeasure(MeasureOracle):
    """Finite weighted point cloud in 1-D or 2-D.

    Atoms are stored sorted by their first coordinate. In 2-D, ball masses use
    a merge-sort tree; the atom set of every query is the same as a linear scan
    with the closed per-coordinate predicate ``x - r <= c <= x + r``.

    Parameters
    ----------
    points : array_like, shape (n,) or (n, d)
    weights : array_like, shape (n,), optional
        Positive weights; uniform ``1/n`` if omitted.
    """

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] not in (1, 2) or len(pts) == 0:
            raise ArgumentError("points must have shape (n,), (n, 1) or (n, 2) with n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ArgumentError("points must be finite")
        n = len(pts)
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != n:
            raise ArgumentError("weights and points differ in length")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ArgumentError("weights must be finite and positive")
        order = np.lexsort(pts.T[::-1])
        self.points = pts[order]
        self.weights = w[order]
        self.dim = pts.shape[1]
        self.total_mass = float(self.weights.sum())
        self.lower = self.points.min(axis=0)
        self.upper = self.points.max(axis=0)
        self._first = self.points[:, 0]
        self._cumw = np.concatenate([[0.0], np.cumsum(self.weights)])
        self._tree = RangeSumTree(self.points[:, 1], self.weights) if self.dim == 2 else None

    def _centers(self, centers) -> np.ndarray:
        c = np.asarray(centers, dtype=float)
        return c.reshape(-1, self.dim)

    def ball_masses(self, centers, radius) -> np.ndarray:
        c = self._centers(centers)
        r = np.broadcast_to(self._check_radius(radius), (len(c),))
        lo = np.searchsorted(self._first, c[:, 0] - r, side="left")
        hi = np.searchsorted(self._first, c[:, 0] + r, side="right")
        if self.dim == 1:
            return self._cumw[hi] - self._cumw[lo]
        return self._tree.query(lo, hi, c[:, 1] - r, c[:, 1] + r)

    def ball_indices(self, center, radius: float) -> np.ndarray:
        """Storage indices of atoms in the closed ball, found through the index."""
        c = self._centers(center)[0]
        r = float(self._check_radius(radius))
        lo = np.searchsorted(self._first, c[0] - r, side="left")
        hi = np.searchsorted(self._first, c[0] + r, side="right")
        idx = np.arange(lo, hi)
        if self.dim == 2:
            v = self.points[lo:hi, 1]
            idx = idx[(v >= c[1] - r) & (v <= c[1] + r)]
        return idx

    def ball_indices_linear(self, center, radius: float) -> np.ndarray:
        """Same as :meth:`ball_indices` by scanning every atom."""
        c = self._centers(center)[0]
        r = float(radius)
        mask = np.ones(len(self.points), dtype=bool)
        for k in range(self.dim):
            mask &= (self.points[:, k] >= c[k] - r) & (self.points[:, k] <= c[k] + r)
        return np.nonzero(mask)[0]

    def support_net(self, mesh: float) -> np.ndarray:
        """First atom (in storage order) of every occupied cell of side ``mesh``."""
        mesh = _check_mesh(mesh)
        cells = np.floor((self.points - self.lower) / mesh).astype(np.int64)
        _, first = np.unique(cells, axis=0, return_index=True)
        net = self.points[np.sort(first)]
        return net[:, 0] if self.dim == 1 else net

    def config(self) -> dict:
        h = hashlib.sha256(np.ascontiguousarray(self.points).tobytes()
                           + np.ascontiguousarray(self.weights).tobytes()).hexdigest()[:16]
        return {"kind": "pointcloud", "atoms": int(len(self.points)), "dim": self.dim, "digest": h}


class MonotoneMap:
    """Strictly monotone continuous map of ``[0, 1]`` onto its image.

    Parameters
    ----------
    func : callable
        Vectorized forward map.
    inverse : callable, optional
        Vectorized inverse on the image. Bisection is used when omitted.
    name : str
    """

    def __init__(self, func: Callable, inverse: Callable | None = None, name: str = "map"):
        self.func = func
        self._inverse = inverse
        self.name = name
        grid = np.linspace(0.0, 1.0, 4097)
        vals = np.asarray(func(grid), dtype=float)
        d = np.diff(vals)
        if not np.all(np.isfinite(vals)):
            raise ArgumentError(f"{name} is not finite on [0, 1]")
        if np.all(d > 0):
            self.increasing = True
        elif np.all(d < 0):
            self.increasing = False
        else:
            raise ArgumentError(f"{name} is not strictly monotone on [0, 1]")
        self.image = (float(min(vals[0], vals[-1])), float(max(vals[0], vals[-1])))

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def inverse(self, y) -> np.ndarray:
        y = np.clip(np.asarray(y, dtype=float), *self.image)
        if self._inverse is not None:
            return np.clip(self._inverse(y), 0.0, 1.0)
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            fm = self.func(mid)
            below = fm < y if self.increasing else fm > y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def config(self) -> dict:
        return {"name": self.name}


class PushforwardMeasure(MeasureOracle):
    """Image ``f_* mu`` of an exact 1-D oracle under a monotone map of ``[0, 1]``.

    Ball masses are exact up to the base oracle's tolerance:
    ``f_* mu(B(y, r)) = mu(f^{-1}[y - r, y + r])``.
    """

    def __init__(self, base: MeasureOracle, fmap: MonotoneMap):
        if base.dim != 1 or not hasattr(base, "interval_mass") or not hasattr(base, "net_cells"):
            raise ArgumentError("base must be an exact 1-D oracle")
        if base.lower[0] < 0 or base.upper[0] > 1:
            raise ArgumentError("base support must lie in [0, 1]")
        self.base = base
        self.map = fmap
        self.dim = 1
        self.total_mass = base.total_mass
        ends = fmap(np.array([base.lower[0], base.upper[0]]))
        self.lower = np.array([ends.min()])
        self.upper = np.array([ends.max()])

    def interval_mass(self, lo, hi) -> np.ndarray:
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        lo_c = np.maximum(lo, self.map.image[0])
        hi_c = np.minimum(hi, self.map.image[1])
        empty = hi_c < lo_c
        pa = self.map.inverse(lo_c)
        pb = self.map.inverse(hi_c)
        if not self.map.increasing:
            pa, pb = pb, pa
        m = self.base.interval_mass(pa, pb)
        return np.where(empty, 0.0, m)

    def cdf(self, y) -> np.ndarray:
        return self.interval_mass(np.full(np.shape(y), self.map.image[0]), y)

    def ball_masses(self, centers, radius) -> np.ndarray:
        r = self._check_radius(radius)
        y = np.asarray(centers, dtype=float).reshape(-1)
        return self.interval_mass(y - r, y + r)

    def net_cells(self, accept: Callable) -> tuple[np.ndarray, np.ndarray]:
        """Images of base cells, refined until ``accept`` holds on the image."""
        f = self.map

        def pulled(lo, hi):
            u, v = f(lo), f(hi)
            return accept(np.minimum(u, v), np.maximum(u, v))

        lo, hi = self.base.net_cells(pulled)
        u, v = f(lo), f(hi)
        return np.minimum(u, v), np.maximum(u, v)

    def support_net(self, mesh: float) -> np.ndarray:
        """Mapped endpoints of base cells whose images are at most ``mesh / 2``
        wide, thinned to one point per cell of side ``mesh / 2``."""
        mesh = _check_mesh(mesh)
        lo, hi = self.net_cells(lambda u, v: v - u <= mesh / 2)
        pts = np.unique(np.concatenate([lo, hi]))
        cells = np.floor((pts - pts[0]) / (mesh / 2)).astype(np.int64)
        _, first = np.unique(cells, return_index=True)
        return pts[np.sort(first)]

    def config(self) -> dict:
        return {"kind": "pushforward", "map": self.map.config(), "base": self.base.config()}


def pushforward(measure: MeasureOracle, fmap: MonotoneMap) -> MeasureOracle:
    """Push ``measure`` forward through a monotone map of ``[0, 1]``.

    Point clouds map atom by atom; exact oracles are wrapped lazily.
    """
    if isinstance(measure, EmpiricalMeasure):
        if measure.dim != 1:
            raise ArgumentError("monotone maps act on 1-D measures only")
        return EmpiricalMeasure(fmap(measure.points[:, 0]), measure.weights)
    return PushforwardMeasure(measure, fmap)
