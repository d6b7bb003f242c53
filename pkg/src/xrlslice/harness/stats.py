"""Empirical CDF and Tukey box-plot statistics for latency and drop samples."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    return x


def summarize_cdf(samples) -> np.ndarray:
    """Sorted ``(value, cumulative fraction)`` pairs; the fraction of the i-th smallest is (i+1)/n."""
    x = np.sort(_as_samples(samples), kind="stable")
    frac = np.arange(1, x.size + 1) / x.size
    return np.column_stack([x, frac])


def quantile(samples, q: float) -> float:
    """Linear-interpolation quantile (numpy's default method)."""
    return float(np.quantile(_as_samples(samples), q))


@dataclass(frozen=True)
class BoxStats:
    p25: float
    p50: float
    p75: float
    iqr: float
    whisker_low: float
    whisker_high: float
    mean: float
    outliers: tuple
    positive_skew: bool

    def as_dict(self) -> dict:
        d = asdict(self)
        d["outliers"] = list(self.outliers)
        d["n_outliers"] = len(self.outliers)
        return d


def summarize_box(samples) -> BoxStats:
    """Tukey box statistics with 1.5 * IQR fences.

    ``whisker_high`` is the largest sample not above ``p75 + 1.5 * IQR``,
    i.e. the maximum excluding outliers.
    """
    x = _as_samples(samples)
    p25, p50, p75 = np.quantile(x, [0.25, 0.5, 0.75])
    iqr = p75 - p25
    lo_fence, hi_fence = p25 - 1.5 * iqr, p75 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = np.sort(x[(x < lo_fence) | (x > hi_fence)])
    mean = float(x.mean())
    return BoxStats(
        p25=float(p25), p50=float(p50), p75=float(p75), iqr=float(iqr),
        whisker_low=float(inside.min()), whisker_high=float(inside.max()),
        mean=mean, outliers=tuple(float(v) for v in outliers),
        positive_skew=bool(mean > p50),
    )
