"""Gaussian process regression over policy-weight vectors.

Zero-mean GP mapping weight vectors to observed episode rewards. The
covariance matrix of the training set is Cholesky-factorised once per fit;
posterior queries reuse the factor. Because the simulator is deterministic
the noise variance is typically 0 and numerical stability is handled by an
escalating diagonal jitter instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernels import (
    KernelSpec,
    gram_matrix,
    _broadcast_scales,
    _correlation,
    _sq_dist_from_scaled,
)

# jitter ladder: try the raw matrix first, then escalate from 1e-8*sigma_f^2
_JITTER_START_REL = 1e-8
_JITTER_CEIL_REL = 1e-2


class FactorizationError(RuntimeError):
    """Covariance matrix could not be factorised even at the jitter ceiling."""


@dataclass(frozen=True)
class GpModel:
    kernel: KernelSpec
    noise_variance: float
    train_inputs: np.ndarray   # (N, M)
    train_targets: np.ndarray  # (N,)
    chol_factor: np.ndarray    # (N, N) lower triangular
    alpha: np.ndarray          # K_W^{-1} z
    jitter: float              # diagonal jitter actually applied
    scaled_inputs: np.ndarray  # train_inputs / length_scales, posterior cache
    scaled_norms: np.ndarray   # row norms of scaled_inputs, posterior cache

    @property
    def num_observations(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.train_inputs.shape[1]


def _try_cholesky(k_matrix: np.ndarray, signal_variance: float):
    """Factorise with escalating jitter; returns (L, jitter used)."""
    n = k_matrix.shape[0]
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(k_matrix + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = _JITTER_START_REL * signal_variance
            else:
                jitter *= 10.0
            if jitter > _JITTER_CEIL_REL * signal_variance * (1 + 1e-12):
                raise FactorizationError(
                    "covariance matrix not positive definite even with "
                    f"jitter up to {_JITTER_CEIL_REL * signal_variance:.3e}"
                ) from None


def gp_fit(kernel: KernelSpec, noise_variance: float, inputs, targets) -> GpModel:
    """Fit the GP: build K_W = k(W, W) + sigma_n^2 I, factorise, cache alpha."""
    W = np.atleast_2d(np.asarray(inputs, dtype=float))
    z = np.asarray(targets, dtype=float).ravel()
    if W.shape[0] != z.size:
        raise ValueError(f"{W.shape[0]} inputs but {z.size} targets")
    if W.shape[0] < 1:
        raise ValueError("need at least one observation")
    if noise_variance < 0:
        raise ValueError("noise_variance must be >= 0")

    K = gram_matrix(kernel, W, W)
    K[np.diag_indices_from(K)] += noise_variance
    L, jitter = _try_cholesky(K, kernel.signal_variance)
    alpha = cho_solve((L, True), z, check_finite=False)
    scaled = W / _broadcast_scales(kernel.length_scales, W.shape[1])
    return GpModel(
        kernel=kernel,
        noise_variance=noise_variance,
        train_inputs=W.copy(),
        train_targets=z.copy(),
        chol_factor=L,
        alpha=alpha,
        jitter=jitter,
        scaled_inputs=scaled,
        scaled_norms=np.einsum("ij,ij->i", scaled, scaled),
    )


def gp_posterior(model: GpModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and marginal variance at the query points.

    Returns (mean, variance) arrays of length Q. Variances are clamped at
    zero from below.
    """
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    if Q.shape[1] != model.input_dim:
        raise ValueError(
            f"query dimension {Q.shape[1]} != training dimension {model.input_dim}"
        )
    qs = Q / _broadcast_scales(model.kernel.length_scales, Q.shape[1])
    d2 = _sq_dist_from_scaled(model.scaled_inputs, model.scaled_norms,
                              qs, np.einsum("ij,ij->i", qs, qs))
    k_star = model.kernel.signal_variance * _correlation(model.kernel.family, d2)
    mean = k_star.T @ model.alpha
    v = solve_triangular(model.chol_factor, k_star, lower=True, check_finite=False)
    var = model.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def gp_update(model: GpModel, new_input, new_target: float) -> GpModel:
    """Model extended by one observation (refit from scratch; N stays small)."""
    x = np.asarray(new_input, dtype=float).ravel()
    if x.size != model.input_dim:
        raise ValueError(f"input dimension {x.size} != {model.input_dim}")
    W = np.vstack([model.train_inputs, x])
    z = np.append(model.train_targets, float(new_target))
    return gp_fit(model.kernel, model.noise_variance, W, z)


def log_marginal_likelihood(model: GpModel) -> float:
    """-1/2 z^T K^-1 z - 1/2 log|K| - N/2 log(2 pi) on the factorised matrix."""
    z = model.train_targets
    n = z.size
    data_fit = -0.5 * float(z @ model.alpha)
    log_det_half = float(np.sum(np.log(np.diag(model.chol_factor))))
    return data_fit - log_det_half - 0.5 * n * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class HyperBounds:
    """Search intervals for the kernel parameters (noise stays fixed)."""

    signal_variance: tuple[float, float] = (1e-4, 1e4)
    length_scales: np.ndarray | tuple[float, float] = (1e-6, 1e6)

    def length_scale_interval(self, i: int) -> tuple[float, float]:
        ls = np.asarray(self.length_scales, dtype=float)
        if ls.ndim == 1:
            return float(ls[0]), float(ls[1])
        return float(ls[i, 0]), float(ls[i, 1])


def default_bounds(kernel: KernelSpec) -> HyperBounds:
    """Length-scales within [1e-3, 1e3] of their current value; sv absolute."""
    ls = kernel.length_scales
    return HyperBounds(
        signal_variance=(1e-4, 1e4),
        length_scales=np.column_stack([ls * 1e-3, ls * 1e3]),
    )


_CANDIDATE_FACTORS = (0.25, 0.5, 2.0, 4.0)


def adapt_hyperparams(model: GpModel, bounds: HyperBounds | None = None) -> GpModel:
    """One cyclic coordinate sweep over (sigma_f^2, length-scales) in log space.

    Each parameter in turn is moved to the candidate (current value scaled by
    a small factor set, clipped to its bounds) with the highest log marginal
    likelihood; moves are only accepted when they improve it, so the result
    never has a lower likelihood than the input model. Returns the input
    model unchanged if nothing improves.
    """
    if model.num_observations < 2:
        raise ValueError("hyperparameter adaptation needs at least 2 observations")
    if bounds is None:
        bounds = default_bounds(model.kernel)

    def refit(kernel: KernelSpec) -> GpModel | None:
        try:
            return gp_fit(kernel, model.noise_variance, model.train_inputs, model.train_targets)
        except FactorizationError:
            return None

    best = model
    best_lml = log_marginal_likelihood(model)
    changed = False

    def try_candidates(make_kernel, current: float, interval: tuple[float, float]):
        nonlocal best, best_lml, changed
        lo, hi = interval
        for f in _CANDIDATE_FACTORS:
            cand = min(max(current * f, lo), hi)
            if cand == current:
                continue
            m = refit(make_kernel(cand))
            if m is None:
                continue
            lml = log_marginal_likelihood(m)
            if lml > best_lml:
                best, best_lml, changed = m, lml, True

    kern = best.kernel
    try_candidates(
        lambda sv: kern.with_params(signal_variance=sv),
        kern.signal_variance,
        bounds.signal_variance,
    )
    for i in range(model.kernel.length_scales.size):
        kern = best.kernel
        ls = kern.length_scales

        def with_scale(val, i=i, kern=kern, ls=ls):
            new_ls = ls.copy()
            new_ls[i] = val
            return kern.with_params(length_scales=new_ls)

        try_candidates(with_scale, float(ls[i]), bounds.length_scale_interval(i))

    return best if changed else model
