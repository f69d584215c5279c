"""Rectified Gaussian distribution and its copula.

A rectified Gaussian vector is max(a, nu) componentwise for nu ~ N(0, Sigma).
Zeros in the data correspond to coordinates stuck at their thresholds, and the
law marginalizes to any coordinate subset, which is what makes the pairwise
maximum-likelihood estimation of Sigma work. This module provides sampling,
the four-branch bivariate likelihood, pairwise correlation estimation, full
matrix assembly, the copula log-density in exact and approximate forms, and
zero-pattern probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DataError, NumericError
from .stat_core import (
    ConditionalGaussian,
    bivariate_normal_cdf,
    clamp_probability,
    conditional_gaussian,
    mvn_logpdf,
    mvn_orthant_mc,
    repair_correlation,
    std_normal_cdf,
    std_normal_logcdf,
    std_normal_logpdf,
)

_LOG_2PI = math.log(2.0 * math.pi)

RHO_BRACKET = 0.9999
GRID_POINTS = 41
BRENT_TOL = 1e-6
BRENT_MAXITER = 200
DEFAULT_MC_SAMPLES = 4096


@dataclass(frozen=True)
class RgdParams:
    """Correlation matrix and per-coordinate thresholds (-inf allowed)."""

    sigma: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma must be a square matrix")
        if a.shape != (sigma.shape[0],):
            raise ValueError("thresholds must match sigma dimension")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class ZeroPattern:
    """Partition of coordinate indices into the zero set and its complement."""

    zero_set: tuple[int, ...]
    positive_set: tuple[int, ...]

    def __post_init__(self):
        zero = tuple(sorted(int(i) for i in self.zero_set))
        pos = tuple(sorted(int(i) for i in self.positive_set))
        all_idx = sorted(zero + pos)
        if all_idx != list(range(len(all_idx))):
            raise ValueError("zero and positive sets must partition 0..D-1")
        object.__setattr__(self, "zero_set", zero)
        object.__setattr__(self, "positive_set", pos)

    @classmethod
    def from_zero_mask(cls, mask) -> "ZeroPattern":
        mask = np.asarray(mask, dtype=bool)
        idx = np.arange(mask.size)
        return cls(zero_set=tuple(idx[mask]), positive_set=tuple(idx[~mask]))

    @property
    def dim(self) -> int:
        return len(self.zero_set) + len(self.positive_set)


def sample_rgd(params: RgdParams, n: int, seed: int) -> np.ndarray:
    """Draw n rows of max(a, nu) with nu ~ N(0, sigma); deterministic per seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    try:
        lower = np.linalg.cholesky(params.sigma)
    except np.linalg.LinAlgError:
        raise NumericError("sigma is not positive definite") from None
    z = rng.standard_normal((int(n), params.dim))
    nu = z @ lower.T
    return np.maximum(params.a, nu)


def _log_bivariate_density(w_i, w_j, rho: float):
    """log of the bivariate standard normal density at (w_i, w_j)."""
    om = 1.0 - rho * rho
    quad = (w_i * w_i - 2.0 * rho * w_i * w_j + w_j * w_j) / om
    return -_LOG_2PI - 0.5 * math.log(om) - 0.5 * quad


def _log_mixed_branch(w_obs, a_zero: float, rho: float):
    """log phi1(w_obs) + log Phi((a_zero - rho*w_obs)/sqrt(1-rho^2))."""
    s = math.sqrt(1.0 - rho * rho)
    return std_normal_logpdf(w_obs) + std_normal_logcdf((a_zero - rho * w_obs) / s)


def pair_loglik(
    w_i: float,
    w_j: float,
    rho: float,
    a_i: float,
    a_j: float,
    zero_i: bool | None = None,
    zero_j: bool | None = None,
) -> float:
    """Log-likelihood of one bivariate rectified observation.

    The branch is selected by whether each coordinate sits at its threshold.
    Callers that know the original data should pass the zero flags explicitly;
    the default infers them by exact comparison with the thresholds, which is
    safe because the omega transform assigns (rather than computes) w = a.
    """
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise ValueError("correlation must satisfy |rho| < 1")
    zi = (w_i == a_i) if zero_i is None else bool(zero_i)
    zj = (w_j == a_j) if zero_j is None else bool(zero_j)
    if zi and zj:
        return float(np.log(clamp_probability(bivariate_normal_cdf(a_i, a_j, rho))))
    if zi:
        return float(_log_mixed_branch(w_j, a_i, rho))
    if zj:
        return float(_log_mixed_branch(w_i, a_j, rho))
    return float(_log_bivariate_density(w_i, w_j, rho))


def _pair_total_loglik(
    rho: float,
    n00: int,
    w_j_only_i_zero: np.ndarray,
    w_i_only_j_zero: np.ndarray,
    w_i_both: np.ndarray,
    w_j_both: np.ndarray,
    a_i: float,
    a_j: float,
) -> float:
    total = 0.0
    if n00:
        total += n00 * math.log(clamp_probability(bivariate_normal_cdf(a_i, a_j, rho)))
    if w_j_only_i_zero.size:
        total += float(np.sum(_log_mixed_branch(w_j_only_i_zero, a_i, rho)))
    if w_i_only_j_zero.size:
        total += float(np.sum(_log_mixed_branch(w_i_only_j_zero, a_j, rho)))
    if w_i_both.size:
        total += float(np.sum(_log_bivariate_density(w_i_both, w_j_both, rho)))
    return total


def estimate_rho(
    w_i,
    w_j,
    a_i: float,
    a_j: float,
    zero_i=None,
    zero_j=None,
) -> float:
    """Maximize the summed pair log-likelihood over rho in (-1, 1).

    A 41-point grid scan brackets the optimum before a bounded Brent polish
    (the likelihood is assumed unimodal; the scan guards against a bad
    bracket). Without any rectified value in either coordinate the likelihood
    is purely Gaussian and the estimate is the sample correlation.
    """
    w_i = np.asarray(w_i, dtype=float)
    w_j = np.asarray(w_j, dtype=float)
    if w_i.shape != w_j.shape or w_i.ndim != 1:
        raise DataError("paired samples must be equal-length vectors")
    n = w_i.size
    if n < 10:
        raise DataError("need at least 10 paired samples")
    zi = (w_i == a_i) if zero_i is None else np.asarray(zero_i, dtype=bool)
    zj = (w_j == a_j) if zero_j is None else np.asarray(zero_j, dtype=bool)

    both_zero = zi & zj
    if np.all(both_zero):
        raise DataError("no information: every pair is rectified in both coordinates")
    if not zi.any() and not zj.any():
        corr = float(np.corrcoef(w_i, w_j)[0, 1])
        if not np.isfinite(corr):
            raise NumericError("sample correlation undefined (constant coordinate)")
        return float(np.clip(corr, -RHO_BRACKET, RHO_BRACKET))

    i_only = zi & ~zj
    j_only = ~zi & zj
    both_pos = ~zi & ~zj
    args = (
        int(both_zero.sum()),
        w_j[i_only],
        w_i[j_only],
        w_i[both_pos],
        w_j[both_pos],
        float(a_i),
        float(a_j),
    )

    grid = np.linspace(-RHO_BRACKET, RHO_BRACKET, GRID_POINTS)
    values = np.array([_pair_total_loglik(r, *args) for r in grid])
    best = int(np.argmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, GRID_POINTS - 1)]
    res = minimize_scalar(
        lambda r: -_pair_total_loglik(r, *args),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": BRENT_TOL, "maxiter": BRENT_MAXITER},
    )
    if not res.success:
        raise NumericError(f"pairwise likelihood maximization failed: {res.message}")
    return float(np.clip(res.x, -RHO_BRACKET, RHO_BRACKET))


def assemble_sigma(
    omega: np.ndarray,
    a,
    use_mle: bool,
    zero_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Build the full correlation matrix from omega-transformed columns.

    With use_mle, every pair goes through estimate_rho; otherwise the plain
    sample correlation over all rows (rectified values included) is taken.
    The result is passed through repair_correlation either way.
    """
    omega = np.asarray(omega, dtype=float)
    a = np.asarray(a, dtype=float)
    if omega.ndim != 2:
        raise DataError("omega must be a matrix")
    d = omega.shape[1]
    if a.shape != (d,):
        raise DataError("threshold vector must match omega columns")
    if zero_mask is None:
        zero_mask = omega == a
    else:
        zero_mask = np.asarray(zero_mask, dtype=bool)
        if zero_mask.shape != omega.shape:
            raise DataError("zero mask must match omega shape")
    if use_mle:
        sigma = np.eye(d)
        for i in range(d):
            for j in range(i + 1, d):
                rho = estimate_rho(
                    omega[:, i],
                    omega[:, j],
                    float(a[i]),
                    float(a[j]),
                    zero_i=zero_mask[:, i],
                    zero_j=zero_mask[:, j],
                )
                sigma[i, j] = sigma[j, i] = rho
    else:
        sigma = np.corrcoef(omega, rowvar=False)
        if not np.all(np.isfinite(sigma)):
            raise NumericError("sample correlation undefined (constant column)")
        np.fill_diagonal(sigma, 1.0)
    return repair_correlation(sigma)


def _check_pattern(params: RgdParams, omega: np.ndarray, pattern: ZeroPattern) -> None:
    if pattern.dim != params.dim or omega.shape != (params.dim,):
        raise ValueError("pattern/omega dimension mismatch")
    for i in pattern.zero_set:
        if not math.isfinite(params.a[i]):
            raise ValueError(
                f"pattern impossible: coordinate {i} has no zero mass (threshold -inf)"
            )
        if omega[i] != params.a[i]:
            raise ValueError(f"omega[{i}] does not sit at its threshold")
    for j in pattern.positive_set:
        # Equality is tolerated: the CDF clamp can collapse an extreme small
        # positive onto the threshold even though the datum is not a zero.
        if omega[j] < params.a[j]:
            raise ValueError(f"omega[{j}] must not fall below its threshold")


def _conditional_orthant_logprob(
    params: RgdParams,
    omega: np.ndarray,
    pattern: ZeroPattern,
    mc_samples: int,
    seed: int,
) -> float:
    """log P(nu_zero <= a_zero | omega on the positive set)."""
    zero = list(pattern.zero_set)
    pos = list(pattern.positive_set)
    if not zero:
        return 0.0
    if pos:
        cond = conditional_gaussian(params.sigma, pos, omega[pos])
    else:
        cond = ConditionalGaussian(
            mean=np.zeros(len(zero)),
            cov=params.sigma[np.ix_(zero, zero)],
        )
    bounds = params.a[zero]
    if len(zero) == 1:
        sd = math.sqrt(max(float(cond.cov[0, 0]), 1e-300))
        return float(std_normal_logcdf((bounds[0] - cond.mean[0]) / sd))
    if len(zero) == 2:
        s0 = math.sqrt(max(float(cond.cov[0, 0]), 1e-300))
        s1 = math.sqrt(max(float(cond.cov[1, 1]), 1e-300))
        r = float(np.clip(cond.cov[0, 1] / (s0 * s1), -1 + 1e-12, 1 - 1e-12))
        p = bivariate_normal_cdf(
            (bounds[0] - cond.mean[0]) / s0,
            (bounds[1] - cond.mean[1]) / s1,
            r,
        )
        return float(np.log(clamp_probability(p)))
    est = mvn_orthant_mc(cond, bounds, mc_samples, seed)
    return float(np.log(clamp_probability(est.estimate)))


def copula_logdensity_exact(
    params: RgdParams,
    omega,
    pattern: ZeroPattern,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """Exact copula log-density of one observation under the rectified law.

    Dense Gaussian term on the positive block, a conditional orthant term for
    the rectified block (closed form up to two rectified coordinates, Monte
    Carlo beyond), normalized by the univariate zero masses and densities.
    """
    omega = np.asarray(omega, dtype=float)
    _check_pattern(params, omega, pattern)
    pos = list(pattern.positive_set)
    zero = list(pattern.zero_set)
    total = 0.0
    if pos:
        sub = params.sigma[np.ix_(pos, pos)]
        total += float(mvn_logpdf(omega[pos], sub))
        total -= float(np.sum(std_normal_logpdf(omega[pos])))
    total += _conditional_orthant_logprob(params, omega, pattern, mc_samples, seed)
    if zero:
        total -= float(np.sum(std_normal_logcdf(params.a[zero])))
    return total


def copula_logdensity_approx(params: RgdParams, omega, pattern: ZeroPattern) -> float:
    """Approximate copula log-density: the conditional orthant term is dropped.

    Polynomial in the positive-block size; correlations involving rectified
    coordinates are partially neglected. Empty positive set returns 0.
    """
    omega = np.asarray(omega, dtype=float)
    _check_pattern(params, omega, pattern)
    pos = list(pattern.positive_set)
    if not pos:
        return 0.0
    sub = params.sigma[np.ix_(pos, pos)]
    total = float(mvn_logpdf(omega[pos], sub))
    total -= float(np.sum(std_normal_logpdf(omega[pos])))
    return total


def zero_pattern_logprob(
    params: RgdParams,
    pattern: ZeroPattern,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """log P(the rectified law produces exactly this zero pattern).

    Closed form for D <= 2, Monte Carlo over N(0, sigma) otherwise (antithetic
    draws, deterministic per seed).
    """
    if pattern.dim != params.dim:
        raise ValueError("pattern dimension mismatch")
    a = params.a
    zero = list(pattern.zero_set)
    pos = list(pattern.positive_set)
    d = params.dim
    if d == 1:
        q = float(std_normal_cdf(a[0]))
        p = q if zero else 1.0 - q
        return float(np.log(clamp_probability(p)))
    if d == 2:
        q0 = float(std_normal_cdf(a[0]))
        q1 = float(std_normal_cdf(a[1]))
        rho = float(params.sigma[0, 1])
        both = (
            bivariate_normal_cdf(a[0], a[1], rho)
            if np.isfinite(a[0]) and np.isfinite(a[1])
            else 0.0
        )
        if len(zero) == 2:
            p = both
        elif len(zero) == 0:
            p = 1.0 - q0 - q1 + both
        elif zero == [0]:
            p = q0 - both
        else:
            p = q1 - both
        return float(np.log(clamp_probability(p)))
    rng = np.random.Generator(np.random.PCG64(seed))
    try:
        lower = np.linalg.cholesky(params.sigma)
    except np.linalg.LinAlgError:
        raise NumericError("sigma is not positive definite") from None
    half = (int(mc_samples) + 1) // 2
    z = rng.standard_normal((half, d))
    hits = 0
    for block in (z @ lower.T, -z @ lower.T):
        inside = np.ones(half, dtype=bool)
        if zero:
            inside &= np.all(block[:, zero] <= a[zero], axis=1)
        if pos:
            inside &= np.all(block[:, pos] > a[pos], axis=1)
        hits += int(inside.sum())
    p = hits / (2.0 * half)
    return float(np.log(clamp_probability(p)))
