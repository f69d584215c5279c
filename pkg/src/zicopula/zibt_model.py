"""Zero-inflated density model on a rectified Gaussian copula.

Zeros are produced by thresholding a latent Gaussian, so zero occurrence
and positive magnitudes share one correlation matrix.  Each variable
contributes its zero mass q at zero and a KDE density on the positives;
the copula ties the coordinates together through thresholds a = Phi^-1(q)
and a correlation estimated by pairwise likelihood over all four
zero/positive branch combinations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .marginals import (
    MarginalModel,
    as_data_matrix,
    fit_columns,
    omega_transform,
    positive_logpdf,
)
from .rgd_copula import (
    DEFAULT_MC_SAMPLES,
    RgdParams,
    ZeroPattern,
    assemble_sigma,
    copula_logdensity_exact,
    zero_pattern_logprob,
)
from .stat_core import (
    PROB_FLOOR,
    mvn_logpdf,
    std_normal_logpdf,
    std_normal_quantile,
)

MIN_FIT_ROWS = 50

_LOG_FLOOR = float(np.log(PROB_FLOOR))
# Stand-in threshold for variables that never hit zero in training: a test
# zero there would otherwise sit at -inf and break the copula evaluation.
_PATCHED_THRESHOLD = float(std_normal_quantile(PROB_FLOOR))


@dataclass(frozen=True)
class ZibtModel:
    """Fitted marginals plus the rectified-copula correlation and thresholds."""

    marginals: tuple[MarginalModel, ...]
    copula: RgdParams
    rescales: np.ndarray
    likelihood_mode: str = "approx"

    def __post_init__(self) -> None:
        marginals = tuple(self.marginals)
        rescales = np.asarray(self.rescales, dtype=float)
        d = len(marginals)
        if self.copula.dim != d:
            raise ValueError("copula dimension must match the marginals")
        if rescales.shape != (d,) or (rescales <= 0).any():
            raise ValueError("rescales must be positive, one per variable")
        if self.likelihood_mode not in ("exact", "approx"):
            raise ValueError("likelihood_mode must be 'exact' or 'approx'")
        for i, m in enumerate(marginals):
            a_i = self.copula.a[i]
            if m.q == 0.0:
                if not np.isneginf(a_i):
                    raise ValueError(f"threshold {i} must be -inf when q = 0")
            elif abs(a_i - std_normal_quantile(m.q)) > 1e-9:
                raise ValueError(f"threshold {i} inconsistent with its zero rate")
        object.__setattr__(self, "marginals", marginals)
        object.__setattr__(self, "rescales", rescales)

    @property
    def dim(self) -> int:
        return len(self.marginals)


def fit_zibt(
    data,
    use_mle_sigma: bool = True,
    use_rescale: bool = True,
    likelihood_mode: str = "approx",
    bandwidth_scale: float = 1.0,
) -> ZibtModel:
    """Fit marginals, thresholds, and the copula correlation."""
    arr = as_data_matrix(data)
    n, d = arr.shape
    if n < MIN_FIT_ROWS:
        raise DataError(f"need at least {MIN_FIT_ROWS} rows, got {n}")
    models, b, scaled = fit_columns(
        arr, use_rescale=use_rescale, bandwidth_scale=bandwidth_scale
    )

    omega = np.empty((n, d))
    for j, m in enumerate(models):
        omega[:, j] = omega_transform(m, scaled[:, j])
    a = np.array([m.a for m in models])
    sigma = assemble_sigma(omega, a, use_mle_sigma, zero_mask=scaled == 0)
    return ZibtModel(
        marginals=tuple(models),
        copula=RgdParams(sigma=sigma, a=a),
        rescales=b,
        likelihood_mode=likelihood_mode,
    )


def _effective_params(model: ZibtModel) -> RgdParams:
    a = model.copula.a
    if np.isfinite(a).all():
        return model.copula
    return RgdParams(sigma=model.copula.sigma, a=np.where(np.isfinite(a), a, _PATCHED_THRESHOLD))


def _row_seed(base_seed: int, row_index: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(row_index)]).generate_state(1)[0])


def zibt_loglik_rows(
    model: ZibtModel,
    data,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    base_seed: int = 0,
) -> np.ndarray:
    """Log-likelihood of each row under the fitted rectified-copula law."""
    arr = as_data_matrix(data, dim=model.dim)
    n, d = arr.shape
    scaled = arr / model.rescales
    positive = scaled > 0
    params = _effective_params(model)

    total = np.zeros(n)
    omega = np.empty((n, d))
    log_b = np.log(model.rescales)
    for j, m in enumerate(model.marginals):
        pos = positive[:, j]
        # log q floored so zeros in a column that never had any stay finite.
        total[~pos] += max(np.log(m.q), _LOG_FLOOR) if m.q > 0 else _LOG_FLOOR
        if pos.any():
            values = scaled[pos, j]
            total[pos] += np.log1p(-m.q) + positive_logpdf(m, values) - log_b[j]
            omega[pos, j] = omega_transform(m, values)
        omega[~pos, j] = params.a[j]

    if model.likelihood_mode == "approx":
        patterns, inverse = np.unique(positive, axis=0, return_inverse=True)
        for g in range(patterns.shape[0]):
            rows = np.flatnonzero(inverse == g)
            pos_idx = np.flatnonzero(patterns[g])
            if pos_idx.size == 0:
                continue
            sub = params.sigma[np.ix_(pos_idx, pos_idx)]
            block = omega[np.ix_(rows, pos_idx)]
            total[rows] += mvn_logpdf(block, sub)
            total[rows] -= std_normal_logpdf(block).sum(axis=1)
    else:
        for i in range(n):
            pattern = ZeroPattern.from_zero_mask(~positive[i])
            total[i] += copula_logdensity_exact(
                params, omega[i], pattern, mc_samples, _row_seed(base_seed, i)
            )
    return total


def zibt_loglik(
    model: ZibtModel,
    x,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """Log-likelihood of a single observation vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("expected a 1-D observation vector")
    return float(zibt_loglik_rows(model, x[None, :], mc_samples, seed)[0])


def zero_pattern_prob(
    model: ZibtModel,
    pattern: ZeroPattern,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """Probability that a draw from the fitted law shows this zero pattern."""
    return float(np.exp(zero_pattern_logprob(model.copula, pattern, mc_samples, seed)))
