"""Monte Carlo estimates of P(S_m - E S_m > threshold) for the reference laws.

Samples are drawn by inverse CDF from 1 - U so the tail keeps the generator's
full resolution. Every batch gets its own Philox stream derived from
(seed, *stream_key, batch_index); counts are summed, so results do not depend
on how many worker threads ran the batches.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import norm

from .concentration import bound, solve_t_max
from .errors import DomainError, DominationFailure
from .tail_model import ReferenceDistribution, TailFunction
from .truncation import exact_c_provider

logger = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.99
# floats drawn per vectorised chunk inside one batch
CHUNK_FLOATS = 2 ** 22
REPORT_COLUMNS = ["m", "t", "p_hat", "ci_lo", "ci_hi", "bound_total", "regime", "margin"]


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int
    seed: int
    batch_size: int = 100_000
    confidence: float = DEFAULT_CONFIDENCE
    workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_samples < self.batch_size:
            raise DomainError(f"n_samples ({self.n_samples}) must be >= batch_size ({self.batch_size})")
        if not 0 < self.confidence < 1:
            raise DomainError(f"confidence must lie in (0, 1), got {self.confidence}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class EmpiricalTail:
    threshold: float
    p_hat: float
    ci: tuple
    n_exceed: int
    n_samples: int
    seed: int


def batch_generator(seed: int, batch_index: int, stream_key=()) -> np.random.Generator:
    """Philox generator for one batch; keyed, never sequentially advanced."""
    ss = np.random.SeedSequence(seed, spawn_key=(*stream_key, batch_index))
    return np.random.Generator(np.random.Philox(ss))


def sample_sums(d: ReferenceDistribution, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws of sum_i (X_i - EX) over ``m`` summands."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    mu = d.mean
    out = np.empty(n, dtype=float)
    rows = max(1, CHUNK_FLOATS // m)
    for start in range(0, n, rows):
        stop = min(start + rows, n)
        v = 1.0 - rng.random((stop - start, m))
        out[start:stop] = (d.quantile(v) - mu).sum(axis=1)
    return out


def sample_sum(d: ReferenceDistribution, m: int, rng: np.random.Generator) -> float:
    return float(sample_sums(d, m, 1, rng)[0])


def wilson_interval(k: int, n: int, confidence: float = DEFAULT_CONFIDENCE):
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        raise DomainError("Wilson interval needs n > 0")
    p = k / n
    z = float(norm.ppf(0.5 + confidence / 2.0))
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    lo = min(max(0.0, center - half), p)
    hi = max(min(1.0, center + half), p)
    return lo, hi


def _batch_counts(d, m, thresholds, n_batch, seed, batch_index, stream_key):
    sums = sample_sums(d, m, n_batch, batch_generator(seed, batch_index, stream_key))
    return [int(np.count_nonzero(sums > th)) for th in thresholds]


def estimate_tails(d: ReferenceDistribution, m: int, thresholds, cfg: MonteCarloConfig,
                   stream_key=()):
    """Exceedance estimates for several thresholds from one shared set of sums."""
    thresholds = [float(th) for th in thresholds]
    if any(math.isnan(th) for th in thresholds):
        raise DomainError("thresholds must not be NaN")
    n_batches = -(-cfg.n_samples // cfg.batch_size)
    sizes = [min(cfg.batch_size, cfg.n_samples - b * cfg.batch_size) for b in range(n_batches)]

    def run(b):
        return _batch_counts(d, m, thresholds, sizes[b], cfg.seed, b, stream_key)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_batch = list(pool.map(run, range(n_batches)))
    else:
        per_batch = [run(b) for b in range(n_batches)]

    totals = np.sum(np.asarray(per_batch, dtype=np.int64), axis=0)
    tails = []
    for th, k in zip(thresholds, totals):
        k = int(k)
        tails.append(EmpiricalTail(
            threshold=th,
            p_hat=k / cfg.n_samples,
            ci=wilson_interval(k, cfg.n_samples, cfg.confidence),
            n_exceed=k,
            n_samples=cfg.n_samples,
            seed=cfg.seed,
        ))
    return tails


def estimate_tail(d: ReferenceDistribution, m: int, threshold: float, cfg: MonteCarloConfig,
                  stream_key=()) -> EmpiricalTail:
    return estimate_tails(d, m, [threshold], cfg, stream_key)[0]


@dataclass
class DominationReport:
    cells: list = field(default_factory=list)
    seed: int = None

    @property
    def failures(self):
        return [c for c in self.cells if not c["passed"]]

    @property
    def passed(self):
        return not self.failures

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.cells, columns=REPORT_COLUMNS)

    def raise_if_failed(self):
        if self.failures:
            raise DominationFailure(self.failures)


@dataclass(frozen=True)
class TSpan:
    """Log-spaced t grid per (distribution, m).

    Runs from ``sigma_multiple`` standard deviations of the mean deviation,
    sigma / sqrt(m), where the event is common, up to ``t_max_multiple``
    times t_max, so one grid crosses both regimes. The lower end is pulled
    down to t_max / 2 when t_max is smaller.
    """
    sigma_multiple: float
    t_max_multiple: float
    points: int = 8

    def resolve(self, d: ReferenceDistribution, m: int, t_max: float) -> list:
        lo = self.sigma_multiple * math.sqrt(d.variance / m)
        if t_max > 0:
            lo = min(lo, 0.5 * t_max)
        hi = max(self.t_max_multiple * t_max, 2.0 * lo)
        return [float(t) for t in np.geomspace(lo, hi, self.points)]

    def to_dict(self):
        return {"sigma_multiple": self.sigma_multiple, "t_max_multiple": self.t_max_multiple,
                "points": self.points}


def dominate_check(d: ReferenceDistribution, f: TailFunction, m_grid, t_grid, beta: float,
                   cfg: MonteCarloConfig, c_provider=None, t_relative=False,
                   strict=True) -> DominationReport:
    """Compare the Wilson lower edge of P-hat with the clamped bound on an (m, t) grid.

    ``t_grid`` is a list of t values, multiples of each m's t_max when
    ``t_relative`` is set, or a TSpan resolved per m. Every
    cell is evaluated; with ``strict`` the report raises DominationFailure
    afterwards if any cell failed.
    """
    provider = c_provider or exact_c_provider(d, f)
    report = DominationReport(seed=cfg.seed)
    for i, m in enumerate(m_grid):
        m = int(m)
        t_max = solve_t_max(f, provider, m, beta)
        if isinstance(t_grid, TSpan):
            ts = t_grid.resolve(d, m, t_max)
        else:
            ts = [float(t) * t_max if t_relative else float(t) for t in t_grid]
        tails = estimate_tails(d, m, [m * t for t in ts], cfg, stream_key=(i,))
        for t, tail in zip(ts, tails):
            b = bound(f, provider, m, t, beta, t_max=t_max)
            margin = b.total_clamped - tail.ci[0]
            report.cells.append({
                "m": m,
                "t": t,
                "p_hat": tail.p_hat,
                "ci_lo": tail.ci[0],
                "ci_hi": tail.ci[1],
                "bound_total": b.total_clamped,
                "regime": b.regime.value,
                "margin": margin,
                "passed": margin >= 0,
            })
        logger.info("domination m=%d: t_max=%.6g, %d cells", m, t_max, len(ts))
    if strict:
        report.raise_if_failed()
    return report
