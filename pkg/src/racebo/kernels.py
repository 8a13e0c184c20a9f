"""Positive-definite kernel functions shared by the policy feature map and the
GP covariance.

All kernels are stationary and are evaluated through a scaled squared
distance, so a single code path serves both the 1-D policy features and the
M-dimensional reward surrogate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class KernelFamily(enum.Enum):
    MATERN1 = "matern1"
    MATERN3 = "matern3"
    SQUARED_EXPONENTIAL = "squared_exponential"


_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class KernelSpec:
    """Parametric kernel: family, signal variance and (ARD) length-scales.

    ``length_scales`` may be a scalar (shared across input dimensions) or a
    vector with one positive entry per dimension.
    """

    family: KernelFamily
    signal_variance: float = 1.0
    length_scales: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not np.all(ls > 0):
            raise ValueError("every length_scale must be > 0")

    def with_params(self, signal_variance=None, length_scales=None) -> "KernelSpec":
        """Copy of this spec with some parameters replaced."""
        return KernelSpec(
            family=self.family,
            signal_variance=self.signal_variance if signal_variance is None else signal_variance,
            length_scales=self.length_scales if length_scales is None else length_scales,
        )


def _broadcast_scales(length_scales: np.ndarray, dim: int) -> np.ndarray:
    ls = np.atleast_1d(np.asarray(length_scales, dtype=float))
    if ls.size == 1:
        return np.full(dim, ls[0])
    if ls.size != dim:
        raise ValueError(f"length_scales has size {ls.size}, inputs have dimension {dim}")
    return ls


def ard_sq_dist(u, v, length_scales) -> float:
    """Scaled squared distance sum_i ((u_i - v_i) / l_i)^2."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    ls = _broadcast_scales(length_scales, u.size)
    d = (u - v) / ls
    return float(d @ d)


def _correlation(family: KernelFamily, sq_dist: np.ndarray) -> np.ndarray:
    """Correlation rho(r) with r = sqrt(sq_dist); sq_dist may be an array."""
    # cancellation in the distance computation can produce tiny negatives
    sq_dist = np.maximum(sq_dist, 0.0)
    if family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * sq_dist)
    r = np.sqrt(sq_dist)
    if family is KernelFamily.MATERN1:
        return np.exp(-r)
    if family is KernelFamily.MATERN3:
        t = _SQRT3 * r
        return (1.0 + t) * np.exp(-t)
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_eval(spec: KernelSpec, u, v) -> float:
    """Evaluate the kernel at a single pair of points."""
    d2 = ard_sq_dist(u, v, spec.length_scales)
    return spec.signal_variance * float(_correlation(spec.family, np.asarray(d2)))


def _scaled(points: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ls = _broadcast_scales(length_scales, pts.shape[1])
    return pts / ls


def _sq_dist_from_scaled(a: np.ndarray, aa: np.ndarray,
                         b: np.ndarray, bb: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of pre-scaled points via the norms trick.

    The norms trick cancels catastrophically for coincident points far from
    the origin; entries at the cancellation noise floor are recomputed
    exactly, since sqrt amplifies any error near zero.
    """
    d2 = np.maximum(aa[:, None] + bb[None, :] - 2.0 * (a @ b.T), 0.0)
    noise_floor = 8.0 * np.finfo(float).eps * (aa[:, None] + bb[None, :])
    suspect = d2 <= noise_floor
    if np.any(suspect):
        i_idx, j_idx = np.nonzero(suspect)
        diff = a[i_idx] - b[j_idx]
        d2[i_idx, j_idx] = np.einsum("ij,ij->i", diff, diff)
    return d2


def sq_dist_matrix(rows, cols, length_scales) -> np.ndarray:
    """Pairwise scaled squared distances between two point sets."""
    a = _scaled(rows, length_scales)
    b = np.atleast_2d(np.asarray(cols, dtype=float))
    if b.shape[1] != a.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    b = _scaled(cols, length_scales)
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    return _sq_dist_from_scaled(a, aa, b, bb)


def gram_matrix(spec: KernelSpec, rows, cols) -> np.ndarray:
    """Kernel matrix over the cross product of two point sets.

    When ``rows`` and ``cols`` are the same set the result is symmetric with
    ``signal_variance`` on the diagonal (enforced exactly).
    """
    d2 = sq_dist_matrix(rows, cols, spec.length_scales)
    k = spec.signal_variance * _correlation(spec.family, d2)
    if k.shape[0] == k.shape[1] and np.array_equal(
        np.atleast_2d(np.asarray(rows, dtype=float)),
        np.atleast_2d(np.asarray(cols, dtype=float)),
    ):
        k = 0.5 * (k + k.T)
        np.fill_diagonal(k, spec.signal_variance)
    return k
