"""Acquisition functions and coordinate-wise acquisition search.

The optimisation loop models episode reward with a GP and, each lap, picks
the next weight vector by maximising an acquisition function. Instead of a
global search over all M weights at once, one sweep of derivative-free 1-D
maximisations is run over the coordinates in a freshly shuffled order,
starting from the best weights found so far. This keeps the per-lap search
cost linear in M and biases it to the region where the surrogate is
informative.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtr

from .gp import (
    GpModel,
    adapt_hyperparams,
    default_bounds,
    gp_fit,
    gp_posterior,
    gp_update,
)
from .kernels import KernelFamily, KernelSpec
from .policy import FeatureMap


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which utility to maximise over the surrogate.

    kind "ucb": mu + beta * sigma. kind "ei": expected improvement over the
    incumbent, with optional offset xi.
    """

    kind: str = "ucb"
    beta: float = 1.0
    xi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ucb", "ei"):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")


def acquisition(model: GpModel, spec: AcquisitionSpec, w, best: float | None = None):
    """Acquisition value at one weight vector or a batch of them.

    Returns a float for a single vector, an array for a (k, M) batch. EI
    needs ``best`` (the incumbent reward); UCB ignores it.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    mean, var = gp_posterior(model, w)
    sigma = np.sqrt(var)
    if spec.kind == "ucb":
        val = mean + spec.beta * sigma
    else:
        if best is None:
            raise ValueError("expected-improvement acquisition needs the incumbent value")
        gain = mean - best - spec.xi
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(sigma > 0, gain / np.where(sigma > 0, sigma, 1.0), 0.0)
        pdf = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        val = np.where(sigma > 0, gain * ndtr(u) + sigma * pdf, np.maximum(gain, 0.0))
        val = np.maximum(val, 0.0)  # guard the far tail against cancellation
    return float(val[0]) if single else val


@dataclass
class SearchBudget:
    """Cap on acquisition-function evaluations for one proposal."""

    max_af_evals: int = 50_000
    evals_used: int = 0

    @property
    def remaining(self) -> int:
        return self.max_af_evals - self.evals_used

    def spend(self, n: int = 1) -> bool:
        """Charge n evaluations; False (and no charge) if they don't fit."""
        if self.evals_used + n > self.max_af_evals:
            return False
        self.evals_used += n
        return True


@dataclass(frozen=True)
class Incumbent:
    weights: np.ndarray
    reward: float


@dataclass(frozen=True)
class LapRecord:
    lap: int                # 1-based episode index
    weights: np.ndarray     # weights evaluated this lap
    reward: float
    incumbent_reward: float
    af_evals: int           # acquisition evaluations spent producing these weights
    wall_ms: float          # proposal-computation time, excludes the simulator


@dataclass(frozen=True)
class RunResult:
    incumbent: Incumbent
    laps: list[LapRecord]
    model: GpModel | None = None  # final surrogate, for BO-family runners


class LineResult(NamedTuple):
    argmax: float
    value: float
    truncated: bool  # budget ran out before the search finished


_SCAN_POINTS = 16
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_XTOL_REL = 5e-4  # bracket width target, relative to the interval halfwidth


def line_maximize(f: Callable[[float], float], center: float, halfwidth: float,
                  budget: SearchBudget, f_center: float | None = None,
                  lo: float | None = None, hi: float | None = None,
                  f_batch: Callable[[np.ndarray], np.ndarray] | None = None) -> LineResult:
    """Derivative-free 1-D maximisation, never worse than the start point.

    A uniform scan of the interval seeds a golden-section refinement around
    the best scanned point. Every call to ``f`` is charged against the
    budget; when it runs out the best point evaluated so far is returned and
    flagged as truncated. ``f_center`` can pass in an already-known value of
    f(center) for free. ``lo``/``hi`` clip the interval (the centre itself
    always stays inside). ``f_batch``, when provided, evaluates an array of
    points in one call (same values as ``f``, one budget charge per point).
    """
    if halfwidth <= 0:
        raise ValueError("halfwidth must be > 0")
    a = center - halfwidth if lo is None else min(max(lo, center - halfwidth), center)
    b = center + halfwidth if hi is None else max(min(hi, center + halfwidth), center)

    if f_center is None:
        if not budget.spend():
            return LineResult(center, -math.inf, True)
        f_center = f(center)
    best_t, best_v = center, f_center
    if b - a <= 0:
        return LineResult(best_t, best_v, False)

    grid = np.linspace(a, b, _SCAN_POINTS)
    spacing = grid[1] - grid[0]
    truncated = False
    if f_batch is not None:
        k = min(len(grid), budget.remaining)
        truncated = k < len(grid)
        if k:
            budget.spend(k)
            vals = np.asarray(f_batch(grid[:k]), dtype=float)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_t, best_v = float(grid[i]), float(vals[i])
    else:
        for t in grid:
            if not budget.spend():
                truncated = True
                break
            v = f(t)
            if v > best_v:
                best_t, best_v = t, v
    if truncated:
        return LineResult(best_t, best_v, True)

    # golden-section refinement inside one grid spacing of the best point
    ga = max(a, best_t - spacing)
    gb = min(b, best_t + spacing)
    xtol = _XTOL_REL * halfwidth
    c = gb - _INV_PHI * (gb - ga)
    d = ga + _INV_PHI * (gb - ga)
    fc = fd = None
    while gb - ga > xtol:
        if fc is None:
            if not budget.spend():
                return LineResult(best_t, best_v, True)
            fc = f(c)
            if fc > best_v:
                best_t, best_v = c, fc
        if fd is None:
            if not budget.spend():
                return LineResult(best_t, best_v, True)
            fd = f(d)
            if fd > best_v:
                best_t, best_v = d, fd
        if fc > fd:
            gb, d, fd = d, c, fc
            c = gb - _INV_PHI * (gb - ga)
            fc = None
        else:
            ga, c, fc = c, d, fd
            d = ga + _INV_PHI * (gb - ga)
            fd = None
    return LineResult(best_t, best_v, False)


def coordinate_ascent_sweep(f: Callable[[np.ndarray], float], start: np.ndarray,
                            halfwidths: np.ndarray, budget: SearchBudget,
                            rng: np.random.Generator,
                            box: tuple[np.ndarray, np.ndarray] | None = None,
                            f_batch: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """One randomised coordinate sweep maximising ``f`` from ``start``.

    Visits every coordinate exactly once in a freshly shuffled order; each
    visit replaces the coordinate by a 1-D line maximisation with all others
    held fixed. The value of f never decreases during the sweep. Stops early
    (returning the partially improved vector) if the budget runs out.
    ``f_batch``, when provided, evaluates a (k, M) array in one call and is
    used to vectorise the scan stage of each line search.
    """
    w = np.array(start, dtype=float)
    m = w.size
    halfwidths = np.broadcast_to(np.asarray(halfwidths, dtype=float), (m,))
    if not budget.spend():
        return w
    f_current = f(w)

    order = rng.permutation(m)
    for i in order:
        def along(t, i=i):
            old = w[i]
            w[i] = t
            val = f(w)
            w[i] = old
            return val

        def along_batch(ts, i=i):
            batch = np.tile(w, (len(ts), 1))
            batch[:, i] = ts
            return f_batch(batch)

        lo_i = None if box is None else float(box[0][i])
        hi_i = None if box is None else float(box[1][i])
        hw = float(halfwidths[i])
        if hw <= 0:
            continue
        res = line_maximize(along, float(w[i]), hw, budget,
                            f_center=f_current, lo=lo_i, hi=hi_i,
                            f_batch=None if f_batch is None else along_batch)
        w[i] = res.argmax
        f_current = res.value
        if res.truncated:
            break
    return w


def stochastic_coordinate_ascent(model: GpModel, spec: AcquisitionSpec,
                                 start: np.ndarray, budget: SearchBudget,
                                 rng: np.random.Generator,
                                 box: tuple[np.ndarray, np.ndarray] | None = None,
                                 best: float | None = None,
                                 length_scale_mult: float = 3.0) -> np.ndarray:
    """Coordinate sweep over the acquisition surface, starting at ``start``.

    Each coordinate is searched within ``length_scale_mult`` GP length-scales
    of its current value (beyond a few length-scales the posterior reverts to
    the prior and the surface is flat), intersected with the global box.
    """
    start = np.asarray(start, dtype=float)
    if start.size != model.input_dim:
        raise ValueError(f"start has {start.size} coordinates, model expects {model.input_dim}")
    ls = np.broadcast_to(model.kernel.length_scales, (start.size,))
    halfwidths = length_scale_mult * ls

    def f(w):
        return acquisition(model, spec, w, best=best)

    return coordinate_ascent_sweep(f, start, halfwidths, budget, rng, box=box,
                                   f_batch=f)


def _initial_surrogate_kernel(num_dims: int, sample_std: float,
                              targets: np.ndarray) -> KernelSpec:
    """Starting GP kernel before any likelihood adaptation."""
    ls0 = sample_std if sample_std > 0 else 1.0
    sv0 = max(float(np.mean(np.square(targets))), 1e-4)
    return KernelSpec(
        KernelFamily.MATERN1,
        signal_variance=sv0,
        length_scales=np.full(num_dims, ls0),
    )


def cdbo_run(objective: Callable[[np.ndarray], float], features: FeatureMap,
             w0: np.ndarray, sigma0: float, warm_starts: int, laps: int,
             spec: AcquisitionSpec, rng: np.random.Generator,
             af_budget: int = 50_000, adapt_every: int = 10,
             noise_variance: float = 0.0, box_radius: float = 10.0) -> RunResult:
    """Full policy-search loop with coordinate-wise acquisition search.

    Draws ``warm_starts`` weight vectors from Normal(w0, sigma0^2 I) to seed
    the surrogate, then spends the remaining budget proposing one candidate
    per lap via :func:`stochastic_coordinate_ascent` started at the current
    incumbent. Exactly ``laps`` objective evaluations are performed; a failed
    episode (reward 0) is a valid observation. The per-coordinate search is
    confined to the global box w0 +/- box_radius * sigma0.
    """
    w0 = np.asarray(w0, dtype=float)
    if warm_starts < 1:
        raise ValueError("need at least one warm-start sample")
    if laps < warm_starts:
        raise ValueError("laps must be >= warm_starts")

    m = w0.size
    box = (w0 - box_radius * sigma0, w0 + box_radius * sigma0)
    records: list[LapRecord] = []
    inputs = np.empty((0, m))
    targets = np.empty(0)
    best_w, best_r = None, -math.inf

    def observe(w: np.ndarray, lap: int, af_evals: int, wall_ms: float):
        nonlocal inputs, targets, best_w, best_r
        r = float(objective(w))
        if r > best_r:
            best_w, best_r = w.copy(), r
        inputs = np.vstack([inputs, w])
        targets = np.append(targets, r)
        records.append(LapRecord(lap, w.copy(), r, best_r, af_evals, wall_ms))
        return r

    for s in range(warm_starts):
        w = w0 + sigma0 * rng.standard_normal(m)
        observe(w, s + 1, 0, 0.0)

    kernel = _initial_surrogate_kernel(m, sigma0, targets)
    model = gp_fit(kernel, noise_variance, inputs, targets)
    bounds = default_bounds(kernel)
    if model.num_observations >= 2:
        model = adapt_hyperparams(model, bounds)

    w_next = best_w.copy()
    pending_af, pending_wall = 0, 0.0
    for lap in range(warm_starts, laps):
        observe(w_next, lap + 1, pending_af, pending_wall)
        model = gp_update(model, w_next, targets[-1])
        if model.num_observations % adapt_every == 0 and model.num_observations >= 2:
            model = adapt_hyperparams(model, bounds)
        if lap == laps - 1:
            break
        budget = SearchBudget(af_budget)
        t0 = time.perf_counter()
        w_next = stochastic_coordinate_ascent(
            model, spec, best_w, budget, rng, box=box, best=best_r
        )
        pending_wall = (time.perf_counter() - t0) * 1e3
        pending_af = budget.evals_used

    return RunResult(Incumbent(best_w, best_r), records, model=model)
