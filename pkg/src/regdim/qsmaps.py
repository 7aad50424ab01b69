"""Quasisymmetric power maps, distortion moduli and the pushforward sandwich check."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .estimators import ScaleGrid, lower_regdim_pair_scan, upper_regdim_pair_scan
from .measures import MeasureOracle, MonotoneMap, pushforward

TRIPLE_BLOCK = 1000
MIN_SEPARATION = 1e-9


class PowerMap(MonotoneMap):
    """The homeomorphism ``x -> x**gamma`` of ``[0, 1]``."""

    def __init__(self, gamma: float):
        gamma = float(gamma)
        if not (gamma > 0 and np.isfinite(gamma)):
            raise ArgumentError("gamma must be finite and positive")
        self.gamma = gamma
        super().__init__(lambda x: np.clip(x, 0.0, 1.0) ** gamma,
                         lambda y: np.clip(y, 0.0, 1.0) ** (1.0 / gamma), name=f"power({gamma:g})")

    @property
    def alpha(self) -> float:
        """Modulus exponent ``min(gamma, 1/gamma)``."""
        return min(self.gamma, 1.0 / self.gamma)

    def config(self) -> dict:
        return {"name": "power", "gamma": self.gamma}


@dataclass(frozen=True)
class EtaModulus:
    """Distortion modulus ``eta(t) = c_eta * max(t**alpha, t**(1/alpha))``."""

    c_eta: float
    alpha: float

    def __post_init__(self):
        if not self.c_eta >= 1:
            raise ArgumentError("c_eta must be at least 1")
        if not 0 < self.alpha <= 1:
            raise ArgumentError("alpha must lie in (0, 1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.c_eta * np.maximum(t ** self.alpha, t ** (1.0 / self.alpha))

    def inverse(self, u):
        """Solve ``eta(t) = u`` for ``t >= 0``."""
        s = np.asarray(u, dtype=float) / self.c_eta
        return np.where(s <= 1, s ** (1.0 / self.alpha), s ** self.alpha)


def inverse_eta(eta: EtaModulus) -> EtaModulus:
    """Modulus of the same form dominating ``t -> 1 / eta^{-1}(1/t)``, the
    distortion of the inverse map: ``(c_eta**(1/alpha), alpha)``."""
    try:
        c = eta.c_eta ** (1.0 / eta.alpha)
    except OverflowError as exc:
        raise ArgumentError("inverse modulus constant overflows a float") from exc
    return EtaModulus(c, eta.alpha)


def _triple_block(fmap: MonotoneMap, alpha: float, size: int, seed: int, block: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    x = rng.random(size)
    z = rng.random(size)
    bad = np.abs(x - z) < MIN_SEPARATION
    while bad.any():
        x[bad] = rng.random(bad.sum())
        z[bad] = rng.random(bad.sum())
        bad = np.abs(x - z) < MIN_SEPARATION
    y = x + rng.random(size) * (z - x)
    t = np.abs(x - y) / np.abs(x - z)
    fx = fmap(x)
    num = np.abs(fx - fmap(y)) / np.abs(fx - fmap(z))
    ok = t > 0
    t, num = t[ok], num[ok]
    q = num / np.maximum(t ** alpha, t ** (1.0 / alpha))
    return float(q.max()) if len(q) else 1.0


def estimate_eta(fmap: PowerMap, triple_samples: int = 10000, seed: int = 0,
                 workers: int = 1) -> EtaModulus:
    """Fit ``c_eta`` for a power map with ``alpha = min(gamma, 1/gamma)``.

    ``c_eta`` is the largest distortion ratio over sampled triples
    ``x, y, z`` with ``x, z`` uniform and ``y`` uniform between them. Triples
    are drawn in blocks of 1000 with streams seeded by ``(seed, block)``, so
    the result does not depend on ``workers``.
    """
    if triple_samples < 1000:
        raise ArgumentError("triple_samples must be at least 1000")
    alpha = fmap.alpha
    nblocks = -(-triple_samples // TRIPLE_BLOCK)
    sizes = [min(TRIPLE_BLOCK, triple_samples - b * TRIPLE_BLOCK) for b in range(nblocks)]

    def run(b):
        return _triple_block(fmap, alpha, sizes[b], seed, b)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            maxima = list(pool.map(run, range(nblocks)))
    else:
        maxima = [run(b) for b in range(nblocks)]
    return EtaModulus(max(1.0, max(maxima)), alpha)


@dataclass(frozen=True)
class SandwichReport:
    """Regularity dimensions of a measure and its power-map image, with bounds."""

    gamma: float
    alpha: float
    c_eta: float
    base_upper: float
    base_lower: float
    push_upper: float
    push_lower: float
    slack: float

    @property
    def upper_bounds(self) -> tuple:
        return (self.alpha * self.base_upper, self.base_upper / self.alpha)

    @property
    def lower_bounds(self) -> tuple:
        return (self.alpha * self.base_lower, self.base_lower / self.alpha)

    @property
    def upper_ok(self) -> bool:
        lo, hi = self.upper_bounds
        return lo - self.slack <= self.push_upper <= hi + self.slack

    @property
    def lower_ok(self) -> bool:
        lo, hi = self.lower_bounds
        return lo - self.slack <= self.push_lower <= hi + self.slack

    @property
    def passed(self) -> bool:
        return self.upper_ok and self.lower_ok

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "c_eta": self.c_eta,
            "base_dims": {"upper": self.base_upper, "lower": self.base_lower},
            "pushforward_dims": {"upper": self.push_upper, "lower": self.push_lower},
            "bounds": {"upper": list(self.upper_bounds), "lower": list(self.lower_bounds),
                       "slack": self.slack},
            "pass": self.passed,
        }


def check_pushforward_sandwich(measure: MeasureOracle, fmap: PowerMap, grid: ScaleGrid | None = None,
                               alpha: float | None = None, slack: float = 0.05,
                               triple_samples: int = 10000, seed: int = 0,
                               workers: int = 1) -> SandwichReport:
    """Check ``alpha * d <= d(f_* mu) <= d / alpha`` for both regularity dimensions.

    Dimensions come from the pair scans with default grids for each measure
    (``grid`` overrides the base grid only). ``alpha`` defaults to the map's
    analytic exponent.
    """
    eta = estimate_eta(fmap, triple_samples, seed, workers)
    a = eta.alpha if alpha is None else float(alpha)
    if not 0 < a <= 1:
        raise ArgumentError("alpha must lie in (0, 1]")
    image = pushforward(measure, fmap)
    base_grid = grid if grid is not None else ScaleGrid.default(measure)
    push_grid = ScaleGrid.default(image)
    return SandwichReport(
        gamma=fmap.gamma, alpha=a, c_eta=eta.c_eta,
        base_upper=upper_regdim_pair_scan(measure, base_grid, workers=workers).value,
        base_lower=lower_regdim_pair_scan(measure, base_grid, workers=workers).value,
        push_upper=upper_regdim_pair_scan(image, push_grid, workers=workers).value,
        push_lower=lower_regdim_pair_scan(image, push_grid, workers=workers).value,
        slack=slack,
    )
