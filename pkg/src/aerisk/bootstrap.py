"""Patient-level bootstrap with counter-based, order-independent seeding.

Replicate ``r`` draws its resample indices from a generator seeded with
``(seed, r)`` (``(seed, r, attempt)`` for redraws), so results do not depend
on how replicates are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import AeriskError, BootstrapError
from .kernels import resample_counts

CI_KINDS = ("percentile", "log-normal")
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 999
    seed: int = 0
    ci_kind: str = "percentile"
    level: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if int(self.replicates) < 2:
            raise ValueError("bootstrap needs at least 2 replicates")
        if self.ci_kind not in CI_KINDS:
            raise ValueError(f"ci_kind must be one of {CI_KINDS}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if int(self.workers) < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    se: float
    ci_low: float
    ci_high: float
    replicates: np.ndarray
    redraws: int


def replicate_rng(seed: int, replicate: int, attempt: int = 0) -> np.random.Generator:
    key = [int(seed) & _SEED_MASK, int(replicate)]
    if attempt:
        key.append(int(attempt))
    return np.random.default_rng(key)


def resample_indices(sizes: Sequence[int], seed: int, replicate: int, attempt: int = 0):
    """Index vectors for each arm of one replicate, drawn in arm order."""
    rng = replicate_rng(seed, replicate, attempt)
    return [rng.integers(0, n, size=n) for n in sizes]


def _map(func, items, workers):
    if workers <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def resample_weights(sizes: Sequence[int], cfg: BootstrapConfig) -> list[np.ndarray]:
    """Per-arm ``(B, n_arm)`` multiplicity matrices for all replicates.

    Row ``r`` is exactly the resample :func:`bootstrap_ci` uses for replicate
    ``r`` on its first attempt.
    """
    draws = _map(lambda r: resample_indices(sizes, cfg.seed, r), range(cfg.replicates), cfg.workers)
    out = []
    for arm, n in enumerate(sizes):
        idx = np.vstack([d[arm] for d in draws]) if n else np.zeros((cfg.replicates, 0), np.int64)
        out.append(resample_counts(idx, n))
    return out


def z_value(level: float) -> float:
    return float(norm.ppf(0.5 + level / 2.0))


def interval(point: float, reps: np.ndarray, cfg: BootstrapConfig) -> tuple[float, float, float]:
    """``(se, low, high)`` from bootstrap replicates."""
    reps = np.asarray(reps, dtype=float)
    se = float(np.std(reps, ddof=1))
    alpha = 1.0 - cfg.level
    if cfg.ci_kind == "percentile":
        lo, hi = np.quantile(reps, [alpha / 2.0, 1.0 - alpha / 2.0])
        return se, float(lo), float(hi)
    if point <= 0 or np.any(reps <= 0):
        raise BootstrapError("log-normal interval needs a positive statistic")
    sd_log = float(np.std(np.log(reps), ddof=1))
    z = z_value(cfg.level)
    return se, point * math.exp(-z * sd_log), point * math.exp(z * sd_log)


def bootstrap_ci(
    statistic: Callable,
    set_e,
    set_c,
    cfg: BootstrapConfig = BootstrapConfig(),
) -> BootstrapResult:
    """Bootstrap a two-arm statistic by resampling patients within each arm.

    A resample on which ``statistic`` raises a library error, divides by
    zero or returns a non-finite value is redrawn; more than ``B/2`` such
    redraws abort with :class:`BootstrapError`.
    """
    point = float(statistic(set_e, set_c))
    sizes = (len(set_e), len(set_c))
    limit = cfg.replicates // 2

    def one(r):
        failures = 0
        for attempt in range(limit + 1):
            idx_e, idx_c = resample_indices(sizes, cfg.seed, r, attempt)
            try:
                value = float(statistic(set_e.take(idx_e), set_c.take(idx_c)))
            except (AeriskError, ZeroDivisionError, ArithmeticError, ValueError):
                value = math.nan
            if math.isfinite(value):
                return value, failures
            failures += 1
        return math.nan, failures

    results = _map(one, range(cfg.replicates), cfg.workers)
    redraws = sum(f for _, f in results)
    reps = np.array([v for v, _ in results])
    if redraws > limit or not np.all(np.isfinite(reps)):
        raise BootstrapError(
            f"{redraws} undefined resamples out of {cfg.replicates} replicates; "
            "statistic is not estimable on too many bootstrap samples"
        )
    se, lo, hi = interval(point, reps, cfg)
    return BootstrapResult(point, se, lo, hi, reps, redraws)
