"""Control policies over normalised track position.

A policy maps x in [0, 1] (position along the track, 0 = start line) to a
scalar action a in [-1, 1] (positive throttle, negative braking). It is the
inner product of a weight vector with a feature vector of kernel evaluations
at M fixed inducing points; the weights are what the optimisers search over.
The initial weights come from a ridge fit of a recorded demonstration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .kernels import KernelFamily, KernelSpec, _correlation


@dataclass(frozen=True)
class FeatureMap:
    """Array of kernels placed over regularly spaced inducing points."""

    kernel: KernelSpec
    inducing_points: np.ndarray  # (M,) positions in [0, 1], ascending

    def __post_init__(self):
        pts = np.asarray(self.inducing_points, dtype=float).ravel()
        object.__setattr__(self, "inducing_points", pts)
        if pts.size < 1:
            raise ValueError("need at least one inducing point")
        if np.any(pts < 0) or np.any(pts > 1):
            raise ValueError("inducing points must lie in [0, 1]")
        if np.any(np.diff(pts) < 0):
            raise ValueError("inducing points must be sorted ascending")

    @property
    def size(self) -> int:
        return self.inducing_points.size

    @classmethod
    def regular(cls, num_kernels: int, length_scale: float | None = None) -> "FeatureMap":
        """Evenly spaced grid {i/(M-1)}; default length-scale is the spacing."""
        if num_kernels < 1:
            raise ValueError("num_kernels must be >= 1")
        if num_kernels == 1:
            grid = np.array([0.5])
            ls = 1.0 if length_scale is None else length_scale
        else:
            grid = np.arange(num_kernels) / (num_kernels - 1)
            ls = 1.0 / (num_kernels - 1) if length_scale is None else length_scale
        kern = KernelSpec(KernelFamily.MATERN3, signal_variance=1.0, length_scales=np.array([ls]))
        return cls(kernel=kern, inducing_points=grid)


def feature_vector(fm: FeatureMap, x: float) -> np.ndarray:
    """phi(x): kernel evaluated between x and every inducing point."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"track position must be in [0, 1], got {x}")
    r = np.abs(x - fm.inducing_points) / fm.kernel.length_scales[0]
    return fm.kernel.signal_variance * _correlation(fm.kernel.family, r * r)


def feature_matrix(fm: FeatureMap, xs) -> np.ndarray:
    """Feature vectors for many positions, one per row."""
    xs = np.asarray(xs, dtype=float).ravel()
    if np.any(xs < 0) or np.any(xs > 1):
        raise ValueError("track positions must be in [0, 1]")
    r = np.abs(xs[:, None] - fm.inducing_points[None, :]) / fm.kernel.length_scales[0]
    return fm.kernel.signal_variance * _correlation(fm.kernel.family, r * r)


@dataclass(frozen=True)
class Policy:
    features: FeatureMap
    weights: np.ndarray  # (M,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "weights", w)
        if w.size != self.features.size:
            raise ValueError(f"{w.size} weights for {self.features.size} inducing points")


def policy_action(p: Policy, x: float) -> float:
    """w^T phi(x), clamped into the valid action range [-1, 1]."""
    a = float(p.weights @ feature_vector(p.features, x))
    return min(max(a, -1.0), 1.0)


@dataclass(frozen=True)
class Demonstration:
    """Recorded (position, action) samples from one valid lap."""

    positions: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float).ravel()
        a = np.asarray(self.actions, dtype=float).ravel()
        if x.size != a.size:
            raise ValueError(f"{x.size} positions but {a.size} actions")
        if x.size == 0:
            raise ValueError("demonstration is empty")
        # recordings that cross the finish line wrap around
        x = np.where(x > 1.0, x % 1.0, x)
        if np.any(np.diff(x) < 0):
            raise ValueError("positions must be nondecreasing")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "actions", a)

    def __len__(self) -> int:
        return self.positions.size


def fit_initial_weights(fm: FeatureMap, demo: Demonstration, ridge: float = 1e-3) -> np.ndarray:
    """Ridge regression of the demonstration actions onto the feature map.

    Solves (Phi^T Phi + ridge I) w = Phi^T a. ridge > 0 keeps the system
    invertible and the weights from blowing up where the grid is poorly
    covered by the demonstration.
    """
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    phi = feature_matrix(fm, demo.positions)
    gram = phi.T @ phi
    gram[np.diag_indices_from(gram)] += ridge
    return solve(gram, phi.T @ demo.actions, assume_a="pos")


def save_demonstration(demo: Demonstration, path) -> None:
    """Two-column text file: position action, one sample per line."""
    np.savetxt(path, np.column_stack([demo.positions, demo.actions]), fmt="%.17g")


def load_demonstration(path) -> Demonstration:
    data = np.atleast_2d(np.loadtxt(path))
    if data.shape[1] != 2:
        raise ValueError(f"expected two columns in {path}, got {data.shape[1]}")
    return Demonstration(positions=data[:, 0], actions=data[:, 1])
