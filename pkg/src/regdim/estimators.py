"""Doubling and uniform-perfectness constants and regularity-dimension estimators.

Two routes estimate each regularity dimension:

* the *pair scan* looks at ball-mass ratios ``m(x, R) / m(x, r)`` for radius
  pairs on one geometric grid;
* the *theta scan* looks at the grid-extremal constants ``C(theta)`` and
  ``K(theta)`` for a geometric range of ``theta``.

Both ratios carry an unknown multiplicative constant, so reading the dimension
off a single ratio (``log ratio / log(R/r)``) is biased by ``log C / log(R/r)``.
The estimators instead fit the slope of the extremal log-ratio against
``log(R/r)`` over separations ``R/r >= theta_min``, which removes the constant.
The uncorrected extremal exponent is kept in ``DimEstimate.extremal``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError
from .measures import MeasureOracle

DIMENSION_CAP = 64.0
_REL = 1e-12


@dataclass(frozen=True)
class ScaleGrid:
    """Radius grid, center-net mesh and minimal scale separation for scans."""

    r_min: float
    r_max: float
    factor: float = 2 ** 0.25
    net_mesh: float | None = None
    theta_min: float = 4.0

    def __post_init__(self):
        if self.net_mesh is None:
            object.__setattr__(self, "net_mesh", float(self.r_min))
        if not (0 < self.r_min < self.r_max and np.isfinite(self.r_max)):
            raise ArgumentError("need 0 < r_min < r_max < inf")
        if not self.factor > 1:
            raise ArgumentError("factor must exceed 1")
        if not self.theta_min > 1:
            raise ArgumentError("theta_min must exceed 1")
        if not self.net_mesh > 0:
            raise ArgumentError("net_mesh must be positive")

    @classmethod
    def default(cls, measure: MeasureOracle, **overrides) -> "ScaleGrid":
        """Radii ``2^-14 * diam`` to ``diam`` with factor ``2^(1/4)``; mesh ``r_min``."""
        diam = measure.support_diameter
        scale = diam if diam > 0 else 1.0
        kw = dict(r_min=2.0 ** -14 * scale, r_max=scale, factor=2 ** 0.25, theta_min=4.0)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def radii(self) -> np.ndarray:
        """Ascending radii ``r_min * factor**j`` not exceeding ``r_max``."""
        steps = int(np.floor(np.log(self.r_max / self.r_min) / np.log(self.factor) + 1e-9))
        r = self.r_min * self.factor ** np.arange(steps + 1)
        return np.minimum(r, self.r_max)

    def check(self, measure: MeasureOracle) -> None:
        diam = measure.support_diameter
        if diam > 0 and self.r_max > diam * (1 + 1e-9):
            raise ArgumentError(f"r_max={self.r_max} exceeds the support diameter {diam}")

    def to_dict(self) -> dict:
        return asdict(self)


def default_thetas(lo: float = 2 ** 0.5, hi: float = 2.0 ** 10, points: int = 40) -> np.ndarray:
    """Geometric theta grid on ``[lo, hi]``."""
    if not (1 < lo < hi) or points < 2:
        raise ArgumentError("theta grid needs 1 < lo < hi and at least 2 points")
    return np.exp(np.linspace(np.log(lo), np.log(hi), points))


@dataclass(frozen=True)
class RatioSample:
    """One ball-mass ratio ``m(x, R) / m(x, r)`` with its exponent."""

    center: tuple
    r: float
    R: float
    ratio: float
    exponent: float

    @classmethod
    def from_log(cls, center, r: float, R: float, log_ratio: float) -> "RatioSample":
        c = tuple(float(v) for v in np.atleast_1d(center))
        return cls(c, float(r), float(R), float(np.exp(log_ratio)), float(log_ratio / np.log(R / r)))

    def requery(self, measure: MeasureOracle) -> float:
        """Recompute the ratio from the oracle."""
        c = np.asarray(self.center)
        return measure.ball_mass(c, self.R) / measure.ball_mass(c, self.r)

    def to_dict(self) -> dict:
        x = self.center[0] if len(self.center) == 1 else list(self.center)
        return {"x": x, "r": self.r, "R": self.R, "ratio": self.ratio}


@dataclass(frozen=True)
class DimEstimate:
    """A dimension estimate with its witness and the grid that produced it.

    Attributes
    ----------
    value : float
        Slope estimate, clipped to ``[0, cap]``.
    witness : RatioSample
        Extremal sample at the widest fitted separation.
    method : str
        ``"pair-scan"``, ``"theta-scan"`` or ``"decay-scan"``.
    kind : str
        ``"upper"`` or ``"lower"``.
    capped : bool
        True when the slope exceeded the cap; read the value as ``>= cap``.
    extremal : float
        Uncorrected extremal exponent over the same samples.
    profile : tuple of (separation, log extremal ratio)
        Points entering the slope fit.
    """

    value: float
    witness: RatioSample
    grid: ScaleGrid
    method: str
    kind: str
    capped: bool = False
    extremal: float = float("nan")
    profile: tuple = field(default=(), repr=False)

    def to_dict(self, measure: MeasureOracle | None = None) -> dict:
        out = {
            "method": self.method,
            "kind": self.kind,
            "value": self.value,
            "capped": self.capped,
            "extremal": self.extremal,
            "witness": self.witness.to_dict(),
            "grid": self.grid.to_dict(),
        }
        if measure is not None:
            out["measure_fingerprint"] = measure.fingerprint()
        return out


@dataclass(frozen=True)
class ProfileEntry:
    theta: float
    constant: float
    witness: RatioSample

    @property
    def exponent(self) -> float:
        return float(np.log(self.constant) / np.log(self.theta))


@dataclass(frozen=True)
class DoublingProfile:
    """Grid-extremal ``C(theta)`` (kind ``"upper"``) or ``K(theta)`` (``"lower"``)."""

    kind: str
    entries: tuple

    def rows(self) -> list:
        return [(e.theta, e.constant, e.exponent) for e in self.entries]


def ls_slope(x, y) -> float:
    """Least-squares slope; exactly odd under joint negation of ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - np.sum(x) / len(x)
    dy = y - np.sum(y) / len(y)
    return float(np.sum(dx * dy) / np.sum(dx * dx))


class _MassTable:
    """Ball masses at a fixed set of centers, cached per radius."""

    def __init__(self, measure: MeasureOracle, centers: np.ndarray, workers: int = 1):
        self.measure = measure
        self.centers = centers
        self.workers = max(1, int(workers))
        self._cols: dict = {}

    def log_masses(self, radii) -> np.ndarray:
        radii = [float(r) for r in np.atleast_1d(radii)]
        todo = sorted({r for r in radii if r not in self._cols})
        if todo:
            if self.workers > 1 and len(todo) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    cols = list(pool.map(self._column, todo))
            else:
                cols = [self._column(r) for r in todo]
            self._cols.update(zip(todo, cols))
        return np.stack([self._cols[r] for r in radii], axis=1)

    def known_radii(self) -> list:
        return list(self._cols)

    def _column(self, r: float) -> np.ndarray:
        m = self.measure.ball_masses(self.centers, r)
        if np.any(~(m > 0)):
            raise ArgumentError(f"zero-mass ball at radius {r}: a center lies outside the support")
        return np.log(m)


def scan_centers(measure: MeasureOracle, grid: ScaleGrid) -> np.ndarray:
    """Net centers in ascending (lexicographic) order."""
    net = np.asarray(measure.support_net(grid.net_mesh), dtype=float)
    if measure.dim == 1:
        return np.sort(net.reshape(-1))
    net = net.reshape(-1, measure.dim)
    return net[np.lexsort(net.T[::-1])]


def _below_diameter(radii: np.ndarray, measure: MeasureOracle) -> np.ndarray:
    diam = measure.support_diameter
    if diam <= 0:
        return np.ones(len(radii), dtype=bool)
    return radii < diam * (1 - _REL)


def _snap(radii: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Replace targets within relative ``1e-12`` of a grid radius by that radius."""
    idx = np.clip(np.searchsorted(radii, target), 1, len(radii) - 1)
    out = target.copy()
    for cand in (idx - 1, idx):
        close = np.abs(radii[cand] - target) <= _REL * target
        out[close] = radii[cand][close]
    return out


def _extreme(values: np.ndarray, upper: bool):
    """First extremal entry in scan order (rows ascending, columns descending).

    ``values`` has columns in ascending radius order.
    Returns ``(value, row, column)``.
    """
    flipped = values[:, ::-1]
    flat = np.argmax(flipped) if upper else np.argmin(flipped)
    row, col = np.unravel_index(flat, flipped.shape)
    return float(flipped[row, col]), int(row), int(values.shape[1] - 1 - col)


def _prepare(measure, grid, workers):
    if grid is None:
        grid = ScaleGrid.default(measure)
    grid.check(measure)
    centers = scan_centers(measure, grid)
    radii = grid.radii()
    if len(radii) < 2:
        raise ArgumentError("radius grid has fewer than two radii")
    return grid, centers, radii, _MassTable(measure, centers, workers)


def _theta_log_ratios(table: _MassTable, radii: np.ndarray, theta: float):
    """``max(log m(x, R) - log m(x, R/theta), 0)`` for every center and ``R`` in ``radii``.

    Also returns the inner radii actually queried (``R/theta`` snapped to cached radii).
    """
    known = np.array(sorted(set(table.known_radii()) | set(map(float, radii))))
    small = _snap(known, radii / theta)
    lr = table.log_masses(radii) - table.log_masses(small)
    # Nested closed balls: negative values are rounding noise.
    return np.maximum(lr, 0.0), small


def _constant(measure, theta, grid, kind, delta=None, workers=1):
    if not theta > 1:
        raise ArgumentError("theta must exceed 1")
    grid, centers, radii, table = _prepare(measure, grid, workers)
    keep = np.ones(len(radii), dtype=bool)
    if delta is not None:
        keep &= radii / theta >= delta * (1 - _REL)
    if kind == "lower":
        keep &= _below_diameter(radii, measure)
    radii = radii[keep]
    if len(radii) == 0:
        raise ArgumentError("no admissible radii on the grid")
    lr, small = _theta_log_ratios(table, radii, theta)
    val, i, j = _extreme(lr, kind == "upper")
    w = RatioSample.from_log(centers[i], small[j], radii[j], val)
    return float(np.exp(val)), w


def doubling_constant(measure: MeasureOracle, theta: float, grid: ScaleGrid | None = None,
                      workers: int = 1):
    """Grid-extremal doubling constant.

    Returns ``(C, witness)`` with ``C = max m(x, R) / m(x, R/theta)`` over net
    centers and grid radii. ``C`` never exceeds the optimal constant.
    """
    return _constant(measure, theta, grid, "upper", workers=workers)


def uniform_perfectness_constant(measure: MeasureOracle, theta: float,
                                 grid: ScaleGrid | None = None, workers: int = 1):
    """Grid-extremal uniform-perfectness constant.

    Returns ``(K, witness)`` with ``K = min m(x, R) / m(x, R/theta)`` over net
    centers and grid radii strictly below the support diameter.
    """
    return _constant(measure, theta, grid, "lower", workers=workers)


def scale_restricted_doubling(measure: MeasureOracle, theta: float, delta: float,
                              grid: ScaleGrid | None = None, workers: int = 1):
    """:func:`doubling_constant` restricted to inner radii ``R/theta >= delta``."""
    return _constant(measure, theta, grid, "upper", delta=delta, workers=workers)


def scale_restricted_perfectness(measure: MeasureOracle, theta: float, delta: float,
                                 grid: ScaleGrid | None = None, workers: int = 1):
    """:func:`uniform_perfectness_constant` restricted to ``R/theta >= delta``."""
    return _constant(measure, theta, grid, "lower", delta=delta, workers=workers)


def doubling_profile(measure: MeasureOracle, thetas=None, grid: ScaleGrid | None = None,
                     kind: str = "upper", workers: int = 1) -> DoublingProfile:
    """Grid-extremal constants for every theta in ``thetas``."""
    if kind not in ("upper", "lower"):
        raise ArgumentError("kind must be 'upper' or 'lower'")
    thetas = default_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    if np.any(~(thetas > 1)) or np.any(np.diff(thetas) <= 0):
        raise ArgumentError("thetas must exceed 1 and increase strictly")
    grid, centers, radii, table = _prepare(measure, grid, workers)
    if kind == "lower":
        radii = radii[_below_diameter(radii, measure)]
        if len(radii) == 0:
            raise ArgumentError("no grid radius lies below the support diameter")
    entries = []
    for th in thetas:
        lr, small = _theta_log_ratios(table, radii, th)
        val, i, j = _extreme(lr, kind == "upper")
        w = RatioSample.from_log(centers[i], small[j], radii[j], val)
        entries.append(ProfileEntry(float(th), float(np.exp(val)), w))
    return DoublingProfile(kind, tuple(entries))


def _finish(slope, extremal, witness, grid, method, kind, profile, cap):
    capped = bool(slope > cap)
    value = float(min(max(slope, 0.0), cap))
    return DimEstimate(value, witness, grid, method, kind, capped, float(extremal), tuple(profile))


def _theta_scan(measure, thetas, grid, kind, cap, workers):
    prof = doubling_profile(measure, thetas, grid, kind, workers)
    grid = grid if grid is not None else ScaleGrid.default(measure)
    th = np.array([e.theta for e in prof.entries])
    lc = np.log([e.constant for e in prof.entries])
    fit = th >= grid.theta_min * (1 - _REL)
    if fit.sum() < 2:
        raise ArgumentError("fewer than two thetas at or above theta_min")
    ratios = lc / np.log(th)
    extremal = ratios.min() if kind == "upper" else ratios.max()
    slope = ls_slope(np.log(th[fit]), lc[fit])
    witness = prof.entries[int(np.nonzero(fit)[0][-1])].witness
    profile = tuple(zip(th[fit].tolist(), lc[fit].tolist()))
    return _finish(slope, extremal, witness, grid, "theta-scan", kind, profile, cap)


def upper_regdim_theta_scan(measure: MeasureOracle, thetas=None, grid: ScaleGrid | None = None,
                            cap: float = DIMENSION_CAP, workers: int = 1) -> DimEstimate:
    """Upper regularity dimension from the growth of ``log C(theta)`` in ``log theta``."""
    return _theta_scan(measure, thetas, grid, "upper", cap, workers)


def lower_regdim_theta_scan(measure: MeasureOracle, thetas=None, grid: ScaleGrid | None = None,
                            cap: float = DIMENSION_CAP, workers: int = 1) -> DimEstimate:
    """Lower regularity dimension from the growth of ``log K(theta)`` in ``log theta``."""
    return _theta_scan(measure, thetas, grid, "lower", cap, workers)


def _separations(grid, radii):
    ks = np.arange(1, len(radii))
    log_sep = ks * np.log(grid.factor)
    fit = log_sep >= np.log(grid.theta_min) * (1 - _REL)
    if fit.sum() < 2:
        raise ArgumentError("grid spans fewer than two separations at or above theta_min")
    return ks[fit], log_sep[fit]


def _plain_profile(L, ks, log_sep, admissible, upper):
    """Extremal ``log m(x, R) - log m(x, r)`` per separation, without witnesses."""
    xs, ys = [], []
    for k, ls in zip(ks, log_sep):
        cols = admissible[k:]
        if cols.any():
            d = np.maximum(L[:, k:] - L[:, :-k], 0.0)[:, cols]
            xs.append(ls)
            ys.append(float(d.max() if upper else d.min()))
    return xs, ys


def _pair_scan(measure, grid, kind, cap, workers, decay=False):
    grid, centers, radii, table = _prepare(measure, grid, workers)
    L = table.log_masses(radii)
    ks, log_sep = _separations(grid, radii)
    upper = kind == "upper"
    everywhere = np.ones(len(radii), dtype=bool)
    below = _below_diameter(radii, measure)
    admissible = everywhere if upper else below
    xs, ys, samples = [], [], []
    for k, ls in zip(ks, log_sep):
        cols = admissible[k:]
        if not cols.any():
            continue
        if decay:
            # log m(x, eps R) - log m(x, R) with eps = r / R.
            d = np.minimum(L[:, :-k] - L[:, k:], 0.0)[:, cols]
            val, i, j = _extreme(d, True)
            xs.append(-ls)
            log_ratio = -val
        else:
            d = np.maximum(L[:, k:] - L[:, :-k], 0.0)[:, cols]
            val, i, j = _extreme(d, upper)
            xs.append(ls)
            log_ratio = val
        ys.append(val)
        jR = np.nonzero(cols)[0][j] + k
        samples.append(RatioSample.from_log(centers[i], radii[jR - k], radii[jR], log_ratio))
    if len(xs) < 2:
        raise ArgumentError("fewer than two admissible separations")
    slope = ls_slope(xs, ys)
    # Fitted slopes of the two extremal profiles can cross; pool them so the
    # lower estimate never exceeds the upper one.
    ox, oy = _plain_profile(L, ks, log_sep, below if upper else everywhere, not upper)
    if len(ox) >= 2:
        other = ls_slope(ox, oy)
        lo, hi = (other, slope) if upper else (slope, other)
        if lo > hi:
            slope = 0.5 * (lo + hi)
    exps = np.array(ys) / np.array(xs)
    extremal = exps.max() if upper else exps.min()
    method = "decay-scan" if decay else "pair-scan"
    return _finish(slope, extremal, samples[-1], grid, method, kind, tuple(zip(xs, ys)), cap)


def upper_regdim_pair_scan(measure: MeasureOracle, grid: ScaleGrid | None = None,
                           cap: float = DIMENSION_CAP, workers: int = 1) -> DimEstimate:
    """Upper regularity dimension from the largest ratios at each grid separation.

    For each separation ``R/r = factor**k >= theta_min`` the maximum of
    ``log m(x, R) - log m(x, r)`` over centers and radii is recorded; the
    estimate is the least-squares slope of these maxima in ``log(R/r)``.
    """
    return _pair_scan(measure, grid, "upper", cap, workers)


def lower_regdim_pair_scan(measure: MeasureOracle, grid: ScaleGrid | None = None,
                           cap: float = DIMENSION_CAP, workers: int = 1) -> DimEstimate:
    """Lower regularity dimension from the smallest ratios at each grid separation.

    Outer radii are restricted to lie strictly below the support diameter.
    """
    return _pair_scan(measure, grid, "lower", cap, workers)


def decaying_exponent(measure: MeasureOracle, grid: ScaleGrid | None = None,
                      cap: float = DIMENSION_CAP, workers: int = 1) -> DimEstimate:
    """Supremal decay exponent: ``m(x, eps R) <= C eps^a m(x, R)``.

    Scans ``log m(x, eps R) - log m(x, R)`` against ``log eps`` on the same
    radius grid as the lower pair scan, so the two agree exactly.
    """
    return _pair_scan(measure, grid, "lower", cap, workers, decay=True)


def heinonen_lower_bound(K: float, C_8K: float) -> float:
    """Lower bound ``-log(1 - 1/C_8K) / log(4K)`` on the lower regularity dimension.

    Parameters
    ----------
    K : float
        Uniform-perfectness constant of the space, ``> 1``.
    C_8K : float
        Doubling constant of the measure at ``theta = 8K``, ``> 1``.
    """
    if not (K > 1 and C_8K > 1):
        raise ArgumentError("need K > 1 and C_8K > 1")
    if np.isinf(C_8K):
        return 0.0
    return float(-np.log1p(-1.0 / C_8K) / np.log(4 * K))


def space_perfectness_constant(measure: MeasureOracle, grid: ScaleGrid | None = None,
                               candidates=None, min_cells: float = 4.0) -> tuple[float, dict]:
    """Smallest candidate ``K`` such that every annulus ``B(x, r) \\ B(x, r/K)``
    around a net center meets the net.

    Radii run over the grid from ``min_cells * net_mesh`` up to the diameter;
    smaller annuli are below the resolution of the net. Candidates default to
    ``2**(j/16)``. Returns ``(K, witness)`` where the witness is the annulus
    forcing the largest ``K``.
    """
    if grid is None:
        grid = ScaleGrid.default(measure)
    cands = 2.0 ** (np.arange(1, 16 * 12 + 1) / 16) if candidates is None else np.sort(candidates)
    net = scan_centers(measure, grid)
    radii = grid.radii()
    radii = radii[radii >= min_cells * grid.net_mesh]
    if len(radii) == 0 or len(net) < 2:
        raise ArgumentError("no radius in the grid resolves the net")
    worst, where = 1.0, None
    for r in radii:
        g = _largest_net_distance(net, r, measure.dim)
        q = r / g
        i = int(np.argmax(q))
        if q[i] > worst:
            worst, where = float(q[i]), (net[i], float(r))
    ok = cands[cands > worst * (1 + 1e-9)]
    if len(ok) == 0:
        raise ArgumentError(f"no candidate exceeds the required ratio {worst}")
    x = None if where is None else np.atleast_1d(where[0]).tolist()
    return float(ok[0]), {"x": x, "r": None if where is None else where[1], "required": worst}


def _largest_net_distance(net, r, dim, chunk: int = 512) -> np.ndarray:
    """Largest distance ``<= r`` from each net point to another net point."""
    if dim == 1:
        hi = net[np.searchsorted(net, net + r, side="right") - 1] - net
        lo = net - net[np.searchsorted(net, net - r, side="left")]
        return np.maximum(hi, lo)
    out = np.empty(len(net))
    for s in range(0, len(net), chunk):
        d = np.max(np.abs(net[s:s + chunk, None, :] - net[None, :, :]), axis=2)
        d[d > r] = 0.0
        out[s:s + chunk] = d.max(axis=1)
    return out


@dataclass(frozen=True)
class HeinonenCheck:
    K_space: float
    C_8K: float
    bound: float
    lower: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def heinonen_check(measure: MeasureOracle, grid: ScaleGrid | None = None, slack: float = 0.01,
                   lower: DimEstimate | None = None, workers: int = 1) -> HeinonenCheck:
    """Compare the lower pair-scan estimate with the closed-form lower bound."""
    if grid is None:
        grid = ScaleGrid.default(measure)
    K, _ = space_perfectness_constant(measure, grid)
    C, _ = doubling_constant(measure, 8 * K, grid, workers)
    bound = heinonen_lower_bound(K, C) if C > 1 else 0.0
    if lower is None:
        lower = lower_regdim_pair_scan(measure, grid, workers=workers)
    return HeinonenCheck(K, C, bound, lower.value, slack, bool(lower.value >= bound - slack))
