"""Symmetric stable Lévy paths, graph measures, rectangle events and blow-up runs."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ArgumentError, ResolutionError
from .estimators import (ScaleGrid, _below_diameter, _MassTable, _REL, _theta_log_ratios,
                         lower_regdim_pair_scan, scan_centers)
from .measures import DEFAULT_TOL, EmpiricalMeasure, Lebesgue, MeasureOracle, SelfSimilarMeasure

MIN_CELLS = 4


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class StableProcessSpec:
    """Symmetric ``alpha``-stable process sampled on ``n`` equal steps of ``[0, 1]``."""

    alpha: float
    n: int
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.alpha <= 2):
            raise ArgumentError("alpha must lie in (0, 2]")
        n = int(self.n)
        if n != self.n or n < 2 or n & (n - 1):
            raise ArgumentError("n must be a power of two, at least 2")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ArgumentError("seed must be a 64-bit unsigned integer")

    @property
    def family(self) -> str:
        if self.alpha == 2:
            return "gaussian"
        if self.alpha == 1:
            return "cauchy"
        return "symmetric-stable"

    def child(self, *keys: int) -> "StableProcessSpec":
        return StableProcessSpec(self.alpha, self.n, derive_seed(self.seed, *keys))


def stable_variates(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Standard symmetric ``alpha``-stable draws (Chambers-Mallows-Stuck transform).

    ``alpha = 2`` gives standard normals and ``alpha = 1`` standard Cauchy draws.
    """
    if alpha == 2:
        return rng.standard_normal(size)
    if alpha == 1:
        return rng.standard_cauchy(size)
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    return (np.sin(alpha * v) / np.cos(v) ** (1 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1 - alpha) / alpha))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Path values on the grid ``t_k = k/n``, ``k = 0..n``."""

    times: np.ndarray
    values: np.ndarray
    process: StableProcessSpec | None = None

    def __post_init__(self):
        if self.times.shape != self.values.shape or self.times.ndim != 1 or len(self.times) < 3:
            raise ArgumentError("times and values must be 1-D arrays of equal length >= 3")
        if not np.all(np.isfinite(self.values)):
            raise ArgumentError("path values must be finite")

    @classmethod
    def from_values(cls, values, process: StableProcessSpec | None = None) -> "SamplePath":
        values = np.asarray(values, dtype=float)
        n = len(values) - 1
        return cls(np.arange(n + 1) / n, values, process)

    @property
    def n(self) -> int:
        return len(self.times) - 1

    def index_of(self, t: float) -> int:
        k = int(round(t * self.n))
        if not (0 <= k <= self.n) or abs(k - t * self.n) > 1e-6:
            raise ArgumentError(f"time {t} is not on the path grid")
        return k

    def value_at(self, t: float) -> float:
        return float(self.values[self.index_of(t)])

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(self.times, self.values):
            w.writerow([f"{t:.12g}", f"{x:.12g}"])


def sample_path(process: StableProcessSpec) -> SamplePath:
    """``X(0) = 0`` and ``X(t_{k+1}) = X(t_k) + n**(-1/alpha) * S_k``."""
    rng = np.random.default_rng(process.seed)
    steps = stable_variates(process.alpha, process.n, rng) * process.n ** (-1.0 / process.alpha)
    return SamplePath.from_values(np.concatenate([[0.0], np.cumsum(steps)]), process)


@dataclass(frozen=True)
class ScalingReport:
    alpha: float
    scaling_alpha: float
    a: float
    num_paths: int
    statistic: float
    pvalue: float

    @property
    def passed(self) -> bool:
        return self.pvalue > 0.01


def scaling_check(process: StableProcessSpec, a: float, num_paths: int = 500,
                  scaling_alpha: float | None = None, workers: int = 1) -> ScalingReport:
    """Two-sample KS test of ``a**(-1/alpha) X(a)`` against ``X(1)``.

    The two samples come from disjoint families of seeded paths. Passing
    ``scaling_alpha`` rescales with a different exponent (a negative control).
    """
    if num_paths < 200:
        raise ArgumentError("num_paths must be at least 200")
    if not 0 < a < 1:
        raise ArgumentError("a must lie in (0, 1)")
    k = int(round(a * process.n))
    if abs(k - a * process.n) > 1e-9 or k == 0:
        raise ArgumentError("a * n must be a positive integer")
    sa = process.alpha if scaling_alpha is None else float(scaling_alpha)

    def draw(stream):
        def one(i):
            return sample_path(process.child(stream, i)).values
        with ThreadPoolExecutor(max(1, workers)) as pool:
            return np.stack(list(pool.map(one, range(num_paths))))

    early = draw(0)[:, k] * a ** (-1.0 / sa)
    late = draw(1)[:, -1]
    res = stats.ks_2samp(early, late)
    return ScalingReport(process.alpha, sa, a, num_paths, float(res.statistic), float(res.pvalue))


def _cell_masses(measure: MeasureOracle, times: np.ndarray) -> np.ndarray:
    """Masses of ``[t_k, t_{k+1})`` for ``k < n-1`` and of the closed last cell."""
    if isinstance(measure, EmpiricalMeasure):
        if measure.dim != 1:
            raise ArgumentError("base measure must live on [0, 1]")
        x = measure.points[:, 0]
        edges = np.searchsorted(x, times, side="left")
        edges[-1] = np.searchsorted(x, times[-1], side="right")
        cw = measure._cumw
        return cw[edges[1:]] - cw[edges[:-1]]
    if isinstance(measure, SelfSimilarMeasure):
        F = measure.cdf(times, DEFAULT_TOL / (len(times) - 1))
    elif hasattr(measure, "cdf"):
        F = measure.cdf(times)
    else:
        raise ArgumentError("base measure must be a 1-D oracle on [0, 1]")
    F = np.asarray(F, dtype=float)
    return np.maximum(np.diff(F), 0.0)


class GraphMeasure(EmpiricalMeasure):
    """Pushforward of a measure on ``[0, 1]`` onto a sampled graph ``t -> (t, X(t))``.

    Atom ``k`` sits at ``(t_k, X(t_k))`` and carries the base mass of the time
    cell ``[t_k, t_{k+1})``. Cells without mass are dropped.
    """

    def __init__(self, base: MeasureOracle, path: SamplePath):
        if base.dim != 1 or base.lower[0] < 0 or base.upper[0] > 1:
            raise ArgumentError("base measure must live on [0, 1]")
        w = _cell_masses(base, path.times)
        keep = np.nonzero(w > 0)[0]
        super().__init__(np.column_stack([path.times[keep], path.values[keep]]), w[keep])
        self.base = base
        self.path = path
        self.cells = keep

    def window(self, t_center: float, width: float) -> tuple[int, int]:
        """Atom index range with times in ``[t_center - width/2, t_center + width/2]``."""
        lo = int(np.searchsorted(self._first, t_center - width / 2, side="left"))
        hi = int(np.searchsorted(self._first, t_center + width / 2, side="right"))
        return lo, hi

    def config(self) -> dict:
        out = {"kind": "graph", "base": self.base.config(), "n": self.path.n}
        if self.path.process is not None:
            p = self.path.process
            out["process"] = {"alpha": p.alpha, "n": p.n, "seed": p.seed}
        return out


def graph_pushforward(measure: MeasureOracle, path: SamplePath) -> GraphMeasure:
    return GraphMeasure(measure, path)


@dataclass(frozen=True)
class Rectangle:
    """``[a - R1/2, a + R1/2] x [X(a) - R2/2, X(a) + R2/2]``."""

    a: float
    R1: float
    R2: float

    def time_bounds(self) -> tuple[float, float]:
        return self.a - self.R1 / 2, self.a + self.R1 / 2

    def to_dict(self) -> dict:
        return {"a": self.a, "R1": self.R1, "R2": self.R2}


@dataclass(frozen=True)
class EventSpec:
    """Scales and exponent of a rectangle event at time ``x``.

    ``beta >= 1`` selects the doubling-breaking variant and ``beta < 1`` the
    perfectness-breaking one.
    """

    x: float
    r: float
    R: float
    beta: float

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ArgumentError("need 0 < r < R")
        if not self.beta > 0:
            raise ArgumentError("beta must be positive")

    @property
    def variant(self) -> str:
        return "upper" if self.beta >= 1 else "lower"


@dataclass(frozen=True)
class EventReport:
    """Outcome of :func:`detect_event`.

    ``big_ok``/``small_ok`` are the two containment conditions and ``event``
    their conjunction. ``ratio`` is the measured mass of the big rectangle
    over that of the small one; ``exponent = log(ratio) / log(R/r)``.
    ``interval_ratio`` is the ratio of base masses of the time intervals
    that the two rectangle masses reduce to when the event holds.
    """

    spec: EventSpec
    alpha: float
    transposed: bool
    big: Rectangle
    small: Rectangle
    big_ok: bool
    small_ok: bool
    big_mass: float
    small_mass: float
    interval_ratio: float

    @property
    def event(self) -> bool:
        return self.big_ok and self.small_ok

    @property
    def ratio(self) -> float:
        return self.big_mass / self.small_mass if self.small_mass > 0 else float("inf")

    @property
    def exponent(self) -> float:
        return float(np.log(self.ratio) / np.log(self.spec.R / self.spec.r))

    def to_dict(self) -> dict:
        s = self.spec
        return {
            "x": s.x, "r": s.r, "R": s.R, "beta": s.beta, "variant": s.variant,
            "alpha": self.alpha, "transposed": self.transposed,
            "big": self.big.to_dict(), "small": self.small.to_dict(),
            "big_ok": self.big_ok, "small_ok": self.small_ok, "event": self.event,
            "big_mass": self.big_mass, "small_mass": self.small_mass,
            "ratio": self.ratio, "exponent": self.exponent, "interval_ratio": self.interval_ratio,
        }


def _min_grid(width: float) -> int:
    n = 2
    while width * n < MIN_CELLS:
        n *= 2
    return n


def _time_mask(times, a, width):
    return (times >= a - width / 2) & (times <= a + width / 2)


def detect_event(path: SamplePath, spec: EventSpec, alpha: float | None = None,
                 graph: GraphMeasure | None = None) -> EventReport:
    """Evaluate a rectangle event on the grid points of ``path``.

    Upper variant (``beta >= 1``): the path over ``I(x, R^a)`` stays inside
    ``Rec(x, R^a, R)``, and the points of ``Rec(x, r, r^(1/a))`` over
    ``I(x, r)`` are exactly the points over ``I(x, r^beta)``.

    Lower variant (``beta < 1``): the points of ``Rec(x, R, R^(1/a))`` over
    ``I(x, R)`` lie over ``I(x, r^beta)``, and the path over ``I(x, r^a)``
    stays inside ``Rec(x, r^a, r)``.

    For ``alpha < 1`` every rectangle has its two sides swapped. Rectangle
    masses come from ``graph`` (Lebesgue graph measure by default).

    Raises
    ------
    ResolutionError
        If a rectangle spans fewer than four grid cells.
    """
    if alpha is None:
        if path.process is None:
            raise ArgumentError("alpha is required for paths without a process")
        alpha = path.process.alpha
    if not 0 < alpha <= 2:
        raise ArgumentError("alpha must lie in (0, 2]")
    if graph is None:
        graph = graph_pushforward(Lebesgue(), path)
    x, r, R, beta = spec.x, spec.r, spec.R, spec.beta
    transposed = alpha < 1
    k0 = path.index_of(x)
    y0 = path.values[k0]
    if spec.variant == "upper":
        if alpha > 1 and not R ** alpha > r:
            raise ArgumentError("need R**alpha > r")
        big = (R ** alpha, R)
        small = (r, r ** (1 / alpha))
    else:
        big = (R, R ** (1 / alpha))
        small = (r ** alpha, r)
    if transposed:
        big, small = big[::-1], small[::-1]
    big_rect, small_rect = Rectangle(x, *big), Rectangle(x, *small)
    n = path.n
    for rect in (big_rect, small_rect):
        if rect.R1 * n < MIN_CELLS:
            raise ResolutionError(f"rectangle time width {rect.R1:.3g} spans fewer than "
                                  f"{MIN_CELLS} cells", _min_grid(rect.R1))
    t, v = path.times, path.values
    core = _time_mask(t, x, r ** beta)
    if spec.variant == "upper":
        over_big = _time_mask(t, x, big_rect.R1)
        big_ok = bool(np.all(np.abs(v[over_big] - y0) <= big_rect.R2 / 2))
        in_small = _time_mask(t, x, small_rect.R1) & (np.abs(v - y0) <= small_rect.R2 / 2)
        small_ok = bool(np.array_equal(in_small, core))
    else:
        in_big = _time_mask(t, x, big_rect.R1) & (np.abs(v - y0) <= big_rect.R2 / 2)
        big_ok = bool(np.all(core[in_big]))
        over_small = _time_mask(t, x, small_rect.R1)
        small_ok = bool(np.all(np.abs(v[over_small] - y0) <= small_rect.R2 / 2))

    gt, gv, gw = graph.points[:, 0], graph.points[:, 1], graph.weights

    def rect_mass(rect):
        m = _time_mask(gt, x, rect.R1) & (np.abs(gv - y0) <= rect.R2 / 2)
        return float(np.sum(gw[m]))

    def interval_mass(width):
        return float(np.sum(gw[_time_mask(gt, x, width)]))

    if spec.variant == "upper":
        num, den = interval_mass(big_rect.R1), interval_mass(r ** beta)
    else:
        num, den = interval_mass(r ** beta), interval_mass(small_rect.R1)
    interval_ratio = num / den if den > 0 else float("inf")
    return EventReport(spec, float(alpha), transposed, big_rect, small_rect, big_ok, small_ok,
                       rect_mass(big_rect), rect_mass(small_rect), interval_ratio)


def synthetic_event_path(n: int, x: float, r: float, R: float, beta: float, alpha: float,
                         height: float | None = None) -> SamplePath:
    """Path that satisfies the upper event at ``(x, r, R, beta)`` by construction.

    The path is zero except on ``I(x, r) \\ I(x, r^beta)``, where it jumps to
    ``height`` (default halfway between ``r^(1/alpha)/2`` and ``R/2``).
    """
    lo, hi = r ** (1 / alpha) / 2, R / 2
    h = (lo + hi) / 2 if height is None else float(height)
    if not lo < h <= hi:
        raise ArgumentError("height must lie in (r^(1/alpha)/2, R/2]")
    t = np.arange(n + 1) / n
    v = np.where(_time_mask(t, x, r) & ~_time_mask(t, x, r ** beta), h, 0.0)
    return SamplePath(t, v)


def event_candidates(path: SamplePath, alpha: float, r_step: float = 2 ** 0.5):
    """Candidate ``(x, r, R)``: ``x = 1 - 2^-i``, ``R = 4^-i``, ``r = R^alpha r_step^-j``."""
    n = path.n
    transposed = alpha < 1
    out = []
    i = 1
    while 2 ** i <= n:
        x, R = 1 - 2.0 ** -i, 4.0 ** -i
        big_w = R if transposed else R ** alpha
        if big_w * n < MIN_CELLS:
            break
        top = min(R ** alpha, R) if alpha > 1 else R
        j = 1
        while True:
            r = top * r_step ** -j
            small_w = r ** (1 / alpha) if transposed else r
            if small_w * n < MIN_CELLS:
                break
            out.append((x, r, R))
            j += 1
        i += 1
    return out


def event_ratio_witness(measure: MeasureOracle, path: SamplePath, s: float,
                        lower_dim: float | None = None, grid: ScaleGrid | None = None,
                        alpha: float | None = None, graph: GraphMeasure | None = None,
                        r_step: float = 2 ** 0.5) -> EventReport:
    """Scan candidate events with ``beta = alpha + s/t``, ``t = lower_dim / 2``.

    ``lower_dim`` defaults to the lower pair-scan estimate of ``measure``.
    Returns the candidate with the largest mass-ratio exponent (first on ties).
    """
    if s < 0:
        raise ArgumentError("s must be non-negative")
    if alpha is None:
        if path.process is None:
            raise ArgumentError("alpha is required for paths without a process")
        alpha = path.process.alpha
    if lower_dim is None:
        lower_dim = lower_regdim_pair_scan(measure, grid).value
    t = lower_dim / 2
    if not t > 0:
        raise ArgumentError("the lower regularity dimension must be positive")
    beta = alpha + s / t
    if graph is None:
        graph = graph_pushforward(measure, path)
    best = None
    for x, r, R in event_candidates(path, alpha, r_step):
        rep = detect_event(path, EventSpec(x, r, R, beta), alpha, graph)
        if rep.small_mass <= 0:
            continue
        if best is None or rep.exponent > best.exponent:
            best = rep
    if best is None:
        raise ResolutionError("no candidate event resolves on this grid", 2 * path.n)
    return best


@dataclass(frozen=True)
class BlowupTable:
    """Scale-restricted constants per seed and their summaries per ``delta``."""

    deltas: tuple
    seeds: tuple
    C: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)

    def rows(self) -> list:
        out = []
        for j, d in enumerate(self.deltas):
            c, k = self.C[:, j], self.K[:, j]
            out.append({"delta": d, "median_C": float(np.median(c)), "median_K": float(np.median(k)),
                        "min_C": float(c.min()), "max_C": float(c.max())})
        return out

    @property
    def median_C(self) -> np.ndarray:
        return np.median(self.C, axis=0)

    @property
    def median_K(self) -> np.ndarray:
        return np.median(self.K, axis=0)


def scale_restricted_constants(measure: MeasureOracle, theta: float, deltas,
                               grid: ScaleGrid | None = None, workers: int = 1):
    """``C(theta; delta)`` and ``K(theta; delta)`` for every ``delta`` from one scan."""
    deltas = np.asarray(deltas, dtype=float)
    if grid is None:
        grid = ScaleGrid.default(measure)
    radii = grid.radii()
    radii = radii[radii / theta >= deltas.min() * (1 - _REL)]
    if len(radii) == 0:
        raise ArgumentError("no radius satisfies R/theta >= delta")
    table = _MassTable(measure, scan_centers(measure, grid), workers)
    lr, _ = _theta_log_ratios(table, radii, theta)
    below = _below_diameter(radii, measure)
    C, K = [], []
    for d in deltas:
        cols = radii / theta >= d * (1 - _REL)
        if not cols.any():
            raise ArgumentError(f"no radius satisfies R/theta >= {d}")
        C.append(float(np.exp(lr[:, cols].max())))
        kc = cols & below
        K.append(float(np.exp(lr[:, kc].min())) if kc.any() else float("nan"))
    return np.array(C), np.array(K)


def blowup_experiment(measure: MeasureOracle, alpha: float, n: int, theta: float, deltas,
                      seeds, workers: int = 1, min_seeds: int = 20) -> BlowupTable:
    """Scale-restricted doubling and perfectness constants on seeded graph measures.

    Each seed gives a path, its graph measure and the constants for every
    ``delta`` (default grid of the graph measure). Seeds run concurrently
    when ``workers > 1``; results are independent of the worker count.
    """
    deltas = tuple(float(d) for d in deltas)
    seeds = tuple(int(s) for s in seeds)
    if len(deltas) == 0 or np.any(np.diff(deltas) >= 0) or min(deltas) <= 0:
        raise ArgumentError("deltas must be positive and strictly decreasing")
    if len(seeds) < min_seeds:
        raise ArgumentError(f"need at least {min_seeds} seeds")
    if not theta > 1:
        raise ArgumentError("theta must exceed 1")

    def run(seed):
        path = sample_path(StableProcessSpec(alpha, n, seed))
        return scale_restricted_constants(graph_pushforward(measure, path), theta, deltas)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            res = list(pool.map(run, seeds))
    else:
        res = [run(s) for s in seeds]
    return BlowupTable(deltas, seeds, np.array([c for c, _ in res]), np.array([k for _, k in res]))
