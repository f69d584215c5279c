"""Zero-inflated density model built from a masked Gaussian-copula parent.

The joint law factorizes into a distribution over zero/positive masks and,
given the positive set, the parent density restricted to it: per-variable
KDE marginals tied together by a Gaussian copula.  The copula correlation
is estimated from jointly positive rows only, so zeros never distort it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError
from .marginals import (
    CDF_CEIL,
    CDF_FLOOR,
    MarginalModel,
    as_data_matrix,
    fit_columns,
    positive_cdf,
    positive_logpdf,
)
from .mask_model import (
    BernoulliMask,
    RbmMask,
    binarize,
    fit_bernoulli,
    fit_rbm,
    mask_logprob_rows,
)
from .stat_core import (
    mvn_logpdf,
    repair_correlation,
    std_normal_logpdf,
    std_normal_quantile,
)

MIN_FIT_ROWS = 50
MIN_JOINT_POSITIVE = 10


@dataclass(frozen=True)
class ZicarModel:
    """Fitted parent marginals, mask distribution, copula correlation."""

    marginals: tuple[MarginalModel, ...]
    mask: BernoulliMask | RbmMask
    sigma: np.ndarray
    rescales: np.ndarray

    def __post_init__(self) -> None:
        marginals = tuple(self.marginals)
        sigma = np.asarray(self.sigma, dtype=float)
        rescales = np.asarray(self.rescales, dtype=float)
        d = len(marginals)
        if sigma.shape != (d, d):
            raise ValueError("sigma dimension must match the marginals")
        if rescales.shape != (d,) or (rescales <= 0).any():
            raise ValueError("rescales must be positive, one per variable")
        mask_dim = self.mask.dim
        if mask_dim != d:
            raise ValueError("mask dimension must match the marginals")
        object.__setattr__(self, "marginals", marginals)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rescales", rescales)

    @property
    def dim(self) -> int:
        return len(self.marginals)


def parent_omega(m: MarginalModel, x) -> np.ndarray:
    """Normal scores of positive values under the parent (positive-part) CDF."""
    u = np.clip(positive_cdf(m, x), CDF_FLOOR, CDF_CEIL)
    return std_normal_quantile(u)


def _sigma_from_joint_positives(
    scaled: np.ndarray, models: list[MarginalModel]
) -> np.ndarray:
    n, d = scaled.shape
    omega = np.full((n, d), np.nan)
    positive = scaled > 0
    for j, m in enumerate(models):
        omega[positive[:, j], j] = parent_omega(m, scaled[positive[:, j], j])
    sigma = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            joint = positive[:, i] & positive[:, j]
            count = int(joint.sum())
            if count < MIN_JOINT_POSITIVE:
                warnings.warn(
                    f"columns {i + 1} and {j + 1}: only {count} jointly positive "
                    "rows; correlation falls back to 0",
                    stacklevel=3,
                )
                continue
            rho = float(np.corrcoef(omega[joint, i], omega[joint, j])[0, 1])
            if not np.isfinite(rho):
                warnings.warn(
                    f"columns {i + 1} and {j + 1}: degenerate joint positives; "
                    "correlation falls back to 0",
                    stacklevel=3,
                )
                rho = 0.0
            sigma[i, j] = sigma[j, i] = rho
    return repair_correlation(sigma)


def _sigma_from_all_rows(data: np.ndarray) -> np.ndarray:
    n, d = data.shape
    omega = np.empty((n, d))
    for j in range(d):
        u = rankdata(data[:, j]) / (n + 1.0)
        omega[:, j] = std_normal_quantile(u)
    sigma = np.corrcoef(omega, rowvar=False)
    bad = ~np.isfinite(sigma)
    if bad.any():
        warnings.warn("constant ranks in some column; correlation falls back to 0",
                      stacklevel=3)
        sigma[bad] = 0.0
    np.fill_diagonal(sigma, 1.0)
    return repair_correlation(sigma)


def fit_zicar(
    data,
    mask_kind: str = "bernoulli",
    use_mle_sigma: bool = True,
    use_rescale: bool = True,
    n_hidden: int | None = None,
    rbm_epochs: int = 200,
    rbm_lr: float = 0.05,
    seed: int = 0,
    bandwidth_scale: float = 1.0,
) -> ZicarModel:
    """Fit marginals, mask, and copula correlation from nonnegative data."""
    arr = as_data_matrix(data)
    n, d = arr.shape
    if n < MIN_FIT_ROWS:
        raise DataError(f"need at least {MIN_FIT_ROWS} rows, got {n}")
    models, b, scaled = fit_columns(
        arr, use_rescale=use_rescale, bandwidth_scale=bandwidth_scale
    )

    masks = binarize(arr)
    if mask_kind == "bernoulli":
        mask = fit_bernoulli(masks)
    elif mask_kind == "rbm":
        hidden = 2 * d if n_hidden is None else int(n_hidden)
        mask = fit_rbm(masks, hidden, epochs=rbm_epochs, lr=rbm_lr, seed=seed)
    else:
        raise ValueError("mask_kind must be 'bernoulli' or 'rbm'")

    if use_mle_sigma:
        sigma = _sigma_from_joint_positives(scaled, models)
    else:
        sigma = _sigma_from_all_rows(scaled)
    return ZicarModel(marginals=tuple(models), mask=mask, sigma=sigma, rescales=b)


def zicar_loglik_rows(model: ZicarModel, data) -> np.ndarray:
    """Log-likelihood of each row: mask + positive marginals + copula."""
    arr = as_data_matrix(data, dim=model.dim)
    n, d = arr.shape
    scaled = arr / model.rescales
    positive = scaled > 0

    total = mask_logprob_rows(model.mask, positive.astype(float))

    # log b is the change-of-variables term: the marginal was fit on x / b,
    # so its density in original units is g(x / b) / b.
    log_b = np.log(model.rescales)
    omega = np.zeros((n, d))
    for j, m in enumerate(model.marginals):
        pos = positive[:, j]
        if pos.any():
            values = scaled[pos, j]
            total[pos] += positive_logpdf(m, values) - log_b[j]
            omega[pos, j] = parent_omega(m, values)

    # Copula term, grouped by zero pattern so each group is one batch call.
    patterns, inverse = np.unique(positive, axis=0, return_inverse=True)
    for g in range(patterns.shape[0]):
        rows = np.flatnonzero(inverse == g)
        pos_idx = np.flatnonzero(positive[rows[0]])
        if pos_idx.size < 2:
            continue
        sub = model.sigma[np.ix_(pos_idx, pos_idx)]
        block = omega[np.ix_(rows, pos_idx)]
        total[rows] += mvn_logpdf(block, sub)
        total[rows] -= std_normal_logpdf(block).sum(axis=1)
    return total


def zicar_loglik(model: ZicarModel, x) -> float:
    """Log-likelihood of a single observation vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("expected a 1-D observation vector")
    return float(zicar_loglik_rows(model, x[None, :])[0])
