"""Quality metrics: depth PSNR and Bjontegaard curve deltas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene_io import DepthMap


class MetricsError(ValueError):
    pass


def mse(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise MetricsError("dimension mismatch")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: DepthMap, b: DepthMap, peak: float | None = None) -> float:
    """Depth PSNR in dB; the peak defaults to the representable depth range
    (continuous-depth convention).  Identical inputs give +inf."""
    if (a.height, a.width) != (b.height, b.width):
        raise MetricsError("dimension mismatch")
    if peak is None:
        peak = a.max_z - a.min_z
    err = mse(a.values, b.values)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


@dataclass(frozen=True)
class RdPoint:
    rate_bits: float
    psnr_db: float
    lam: float = 0.0
    n_regions: int = 0
    sections: dict = field(default_factory=dict)
    mse: float = 0.0

    def __post_init__(self):
        if not self.rate_bits > 0:
            raise MetricsError("rate must be positive")


@dataclass(frozen=True)
class RdCurve:
    points: tuple

    @staticmethod
    def from_points(points) -> "RdCurve":
        return RdCurve(tuple(sorted(points, key=lambda p: p.rate_bits)))

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate_bits for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr_db for p in self.points])

    def hull(self) -> "RdCurve":
        """Upper-left staircase: strictly increasing rate and PSNR."""
        kept = []
        for p in sorted(self.points, key=lambda p: (p.rate_bits, -p.psnr_db)):
            while kept and p.psnr_db >= kept[-1].psnr_db:
                kept.pop()
            if not kept or p.rate_bits > kept[-1].rate_bits:
                kept.append(p)
        return RdCurve(tuple(kept))


def _fit_check(curve: RdCurve):
    if len(curve.points) < 4:
        raise MetricsError("Bjontegaard metrics need at least 4 points")
    if np.any(curve.rates <= 0):
        raise MetricsError("rates must be positive")


def bd_metrics(test: RdCurve, reference: RdCurve):
    """Standard Bjontegaard deltas of `test` against `reference`.

    Returns (bd_rate percent, bd_snr dB): cubic fits of PSNR over log10 rate
    (and of log10 rate over PSNR) integrated over the overlapping interval.
    Negative bd_rate means the test curve needs fewer bits.
    """
    _fit_check(test)
    _fit_check(reference)

    lr_t = np.log10(test.rates)
    lr_r = np.log10(reference.rates)
    p_t = test.psnrs
    p_r = reference.psnrs

    # BD-SNR: psnr as a function of log-rate
    lo = max(lr_t.min(), lr_r.min())
    hi = min(lr_t.max(), lr_r.max())
    if hi <= lo:
        raise MetricsError("curves do not overlap in rate")
    poly_t = np.polynomial.Polynomial.fit(lr_t, p_t, 3)
    poly_r = np.polynomial.Polynomial.fit(lr_r, p_r, 3)
    int_t = poly_t.integ()
    int_r = poly_r.integ()
    bd_snr = ((int_t(hi) - int_t(lo)) - (int_r(hi) - int_r(lo))) / (hi - lo)

    # BD-rate: log-rate as a function of psnr
    lo = max(p_t.min(), p_r.min())
    hi = min(p_t.max(), p_r.max())
    if hi <= lo:
        raise MetricsError("curves do not overlap in quality")
    poly_t = np.polynomial.Polynomial.fit(p_t, lr_t, 3)
    poly_r = np.polynomial.Polynomial.fit(p_r, lr_r, 3)
    int_t = poly_t.integ()
    int_r = poly_r.integ()
    avg_diff = ((int_t(hi) - int_t(lo)) - (int_r(hi) - int_r(lo))) / (hi - lo)
    bd_rate = (10.0 ** avg_diff - 1.0) * 100.0
    return bd_rate, float(bd_snr)
