"""Estimators for the two-pulse records: variances, correlations, conditioning.

All variance estimators are Bessel-corrected.  The +/- combinations carry a
factor 1/2, i.e. sigma_plus = Var(s1 + s2)/2 and sigma_minus = Var(s1 - s2)/2,
so every estimator reads 1/2 at the shot-noise floor.  Standard errors use the
Gaussian fourth-moment formula Var(sample variance) = 2*sigma^4/(n-1); the
bootstrap is available as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .montecarlo import RunResult

# Identity tolerance for sigma_plus + sigma_minus = sigma1 + sigma2.
PARALLELOGRAM_TOL = 1e-9

DEFAULT_BINS = 21
# Bin range +/-2.5 sigma keeps >= 98% of Gaussian data; bins with fewer than
# two shots cannot carry a Bessel-corrected variance and are dropped.
DEFAULT_HALF_RANGE_SIGMAS = 2.5
MIN_BIN_COUNT = 2


class InsufficientDataError(ValueError):
    """Raised when a dataset is too small (or too degenerate) to estimate."""


@dataclass(frozen=True)
class VarianceSummary:
    """Individual and correlation variances of a run, with standard errors."""

    sigma1: float
    sigma2: float
    sigma_plus: float
    sigma_minus: float
    se_sigma1: float
    se_sigma2: float
    se_plus: float
    se_minus: float
    n: int

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma_plus", "sigma_minus"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        lhs = self.sigma_plus + self.sigma_minus
        rhs = self.sigma1 + self.sigma2
        if abs(lhs - rhs) > PARALLELOGRAM_TOL * max(1.0, abs(rhs)):
            raise ValueError("parallelogram identity violated")

    def to_dict(self) -> dict:
        return {
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "sigma_plus": self.sigma_plus,
            "sigma_minus": self.sigma_minus,
            "se_sigma1": self.se_sigma1,
            "se_sigma2": self.se_sigma2,
            "se_plus": self.se_plus,
            "se_minus": self.se_minus,
            "n": self.n,
        }


@dataclass(frozen=True)
class ConditionalResult:
    """Binned conditional variance of s2 given s1, and the implied squeezing."""

    sigma_cond: float
    n_bins: int
    bin_edges: tuple[float, ...]
    per_bin: tuple[tuple[int, float], ...]
    squeezing_db: float
    se_cond: float

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("n_bins must be at least 1")
        if self.sigma_cond < 0:
            raise ValueError("sigma_cond must be non-negative")
        if len(self.bin_edges) != self.n_bins + 1:
            raise ValueError("bin_edges must have n_bins + 1 entries")
        if len(self.per_bin) != self.n_bins:
            raise ValueError("per_bin must have n_bins entries")

    def to_dict(self) -> dict:
        return {
            "sigma_cond": self.sigma_cond,
            "n_bins": self.n_bins,
            "bin_edges": list(self.bin_edges),
            "per_bin": [[c, v] for c, v in self.per_bin],
            "squeezing_db": self.squeezing_db,
            "se_cond": self.se_cond,
        }


def _shot_arrays(data) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(data, RunResult):
        return data.s1, data.s2, data.kappa_shot
    records = list(data)
    n = len(records)
    s1 = np.fromiter((r.s1 for r in records), dtype=float, count=n)
    s2 = np.fromiter((r.s2 for r in records), dtype=float, count=n)
    kappa = np.fromiter((r.kappa_shot for r in records), dtype=float, count=n)
    return s1, s2, kappa


def variances(data) -> VarianceSummary:
    """Sigma_1, sigma_2 and the +/- correlation variances with standard errors."""
    s1, s2, _ = _shot_arrays(data)
    n = len(s1)
    if n < 2:
        raise InsufficientDataError("need at least two shots")
    se_factor = math.sqrt(2.0 / (n - 1))
    sigma1 = float(np.var(s1, ddof=1))
    sigma2 = float(np.var(s2, ddof=1))
    sigma_plus = float(np.var(s1 + s2, ddof=1)) / 2.0
    sigma_minus = float(np.var(s1 - s2, ddof=1)) / 2.0
    return VarianceSummary(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma_plus=sigma_plus,
        sigma_minus=sigma_minus,
        se_sigma1=sigma1 * se_factor,
        se_sigma2=sigma2 * se_factor,
        se_plus=sigma_plus * se_factor,
        se_minus=sigma_minus * se_factor,
        n=n,
    )


def _binned(s1, s2, n_bins, half_range_sigmas, count_weighted):
    """Shared binning kernel; returns (sigma_cond, se, edges, counts, bin_vars)."""
    n = len(s1)
    if n < 2 * MIN_BIN_COUNT:
        raise InsufficientDataError("need at least four shots to bin")
    center = s1.mean()
    spread = s1.std(ddof=1)
    if spread == 0.0:
        raise InsufficientDataError("s1 has zero spread, cannot bin")
    edges = np.linspace(
        center - half_range_sigmas * spread, center + half_range_sigmas * spread, n_bins + 1
    )
    idx = np.digitize(s1, edges) - 1
    idx[s1 == edges[-1]] = n_bins - 1  # keep the inclusive upper boundary
    inside = (idx >= 0) & (idx < n_bins)
    which = idx[inside]
    centered = s2[inside] - s2.mean()  # improves the single-pass cancellation
    counts = np.bincount(which, minlength=n_bins)
    sums = np.bincount(which, weights=centered, minlength=n_bins)
    sq = np.bincount(which, weights=centered * centered, minlength=n_bins)
    usable = counts >= MIN_BIN_COUNT
    if usable.sum() < 2:
        raise InsufficientDataError("fewer than two usable bins")
    c = counts[usable].astype(float)
    bin_var = np.full(n_bins, math.nan)
    bin_var[usable] = (sq[usable] - sums[usable] ** 2 / c) / (c - 1.0)
    weights = c if count_weighted else np.ones_like(c)
    sigma_cond = float(np.sum(weights * bin_var[usable]) / weights.sum())
    # per-bin Var(variance) ~ 2*sigma^4/(n_b - 1), pooled sigma^4.
    se = float(sigma_cond * math.sqrt(2.0 * np.sum(weights**2 / (c - 1.0))) / weights.sum())
    return sigma_cond, se, edges, counts, bin_var


def binned_conditional(
    data,
    n_bins: int = DEFAULT_BINS,
    half_range_sigmas: float = DEFAULT_HALF_RANGE_SIGMAS,
    kappa: float | None = None,
    count_weighted: bool = True,
) -> ConditionalResult:
    """Conditional variance of s2 from equal-width bins of s1.

    Bins cover mean(s1) +/- half_range_sigmas * std(s1); shots outside are
    excluded.  sigma_cond averages the per-bin variances of s2 over bins with
    at least two shots, weighted by bin count (or uniformly when
    ``count_weighted`` is off).  ``kappa`` converts the conditioning gain to a
    squeezing figure; when omitted it is taken from the records' own per-shot
    couplings.  squeezing_db is NaN at zero coupling (undefined) and +inf when
    sigma_cond does not exceed the shot-noise floor (finite-sample artifact).
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if half_range_sigmas <= 0:
        raise ValueError("half_range_sigmas must be positive")
    s1, s2, kappa_shot = _shot_arrays(data)
    sigma_cond, se, edges, counts, bin_var = _binned(
        s1, s2, n_bins, half_range_sigmas, count_weighted
    )
    if kappa is None:
        kappa = math.sqrt(float(np.mean(kappa_shot**2))) if len(kappa_shot) else 0.0
    if kappa == 0.0:
        db = math.nan
    elif sigma_cond <= 0.5:
        db = math.inf
    else:
        db = squeezing_db(sigma_cond, kappa)
    return ConditionalResult(
        sigma_cond=sigma_cond,
        n_bins=n_bins,
        bin_edges=tuple(edges.tolist()),
        per_bin=tuple(
            (int(c), float(v)) for c, v in zip(counts.tolist(), bin_var.tolist())
        ),
        squeezing_db=db,
        se_cond=se,
    )


def exact_conditional(kappa: float) -> float:
    """Closed-form conditional variance (1 + 2*kappa^2) / (2*(1 + kappa^2))."""
    k2 = kappa * kappa
    return (1.0 + 2.0 * k2) / (2.0 * (1.0 + k2))


def squeezing_db(sigma_cond: float, kappa: float) -> float:
    """Squeezing of the inferred atomic z variance, in dB (positive = squeezed).

    The conditioning gain sigma_cond - 1/2 equals kappa^2 times the residual
    atomic variance, so the ratio of the shot-noise floor kappa^2/2 to the
    gain is the squeezing factor: 10*log10[(kappa^2/2) / (sigma_cond - 1/2)].
    Returns +inf when sigma_cond does not exceed 1/2 (formally infinite
    squeezing, a finite-sample artifact).
    """
    if kappa == 0.0:
        raise ValueError("squeezing is undefined at zero coupling")
    if sigma_cond <= 0.5:
        return math.inf
    return 10.0 * math.log10((kappa * kappa / 2.0) / (sigma_cond - 0.5))


def conditional_from_db(squeezing_db_value: float, kappa: float) -> float:
    """Inverse of :func:`squeezing_db`, for testing alternative conventions."""
    if kappa == 0.0:
        raise ValueError("squeezing is undefined at zero coupling")
    return 0.5 + (kappa * kappa / 2.0) * 10.0 ** (-squeezing_db_value / 10.0)


def _est_sigma_cond(s1, s2):
    value, _, _, _, _ = _binned(s1, s2, DEFAULT_BINS, DEFAULT_HALF_RANGE_SIGMAS, True)
    return value


_ESTIMATORS = {
    "sigma1": lambda s1, s2: float(np.var(s1, ddof=1)),
    "sigma2": lambda s1, s2: float(np.var(s2, ddof=1)),
    "sigma_plus": lambda s1, s2: float(np.var(s1 + s2, ddof=1)) / 2.0,
    "sigma_minus": lambda s1, s2: float(np.var(s1 - s2, ddof=1)) / 2.0,
    "sigma_cond": _est_sigma_cond,
    "conditioning_gain": lambda s1, s2: float(np.var(s2, ddof=1))
    - _est_sigma_cond(s1, s2),
}


def bootstrap_ci(
    data,
    estimator: str,
    resamples: int = 1000,
    level: float = 0.683,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for a named estimator.

    Estimator names: sigma1, sigma2, sigma_plus, sigma_minus, sigma_cond,
    conditioning_gain.  Deterministic for a given seed (single Philox stream,
    the same generator family as the sampler).
    """
    if estimator not in _ESTIMATORS:
        raise ValueError(
            f"unknown estimator {estimator!r}; choose from {sorted(_ESTIMATORS)}"
        )
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    s1, s2, _ = _shot_arrays(data)
    n = len(s1)
    if n < 10:
        raise InsufficientDataError("need at least ten shots to bootstrap")
    fn = _ESTIMATORS[estimator]
    rng = Generator(Philox(key=seed))
    values = np.empty(resamples)
    for r in range(resamples):
        idx = rng.integers(0, n, size=n)
        values[r] = fn(s1[idx], s2[idx])
    alpha = (1.0 - level) / 2.0
    return float(np.quantile(values, alpha)), float(np.quantile(values, 1.0 - alpha))
