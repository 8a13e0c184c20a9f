"""Comparison optimisers: CMA-ES, plain BO with a CMA-ES acquisition search,
random-embedding BO, and uniform random search as a floor.

All runners consume exactly N objective evaluations, emit a nondecreasing
incumbent trace of length N, and are deterministic given their random
generator. The CMA-ES here is the standard (mu/mu_w, lambda) strategy with
rank-1 and rank-mu covariance updates; the harness labels it "cmaes-std".
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .gp import adapt_hyperparams, default_bounds, gp_fit, gp_update
from .search import (
    AcquisitionSpec,
    Incumbent,
    LapRecord,
    RunResult,
    SearchBudget,
    acquisition,
    _initial_surrogate_kernel,
)


class CmaEs:
    """Minimising (mu/mu_w, lambda) CMA-ES with ask/tell interface."""

    def __init__(self, x0, sigma: float, rng: np.random.Generator,
                 popsize: int | None = None):
        x0 = np.asarray(x0, dtype=float)
        n = x0.size
        lam = popsize if popsize is not None else 4 + int(3 * math.log(n))
        mu = lam // 2
        w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        mueff = 1.0 / float(w @ w)

        self.dim = n
        self.rng = rng
        self.popsize = lam
        self.num_parents = mu
        self.weights = w
        self.mueff = mueff
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1,
                       2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = x0.copy()
        self.sigma = float(sigma)
        self.path_c = np.zeros(n)
        self.path_s = np.zeros(n)
        self.cov = np.eye(n)
        self.eigen_basis = np.eye(n)
        self.eigen_values = np.ones(n)
        self.inv_sqrt_cov = np.eye(n)
        self.counteval = 0
        self._eigen_at = 0

    def _update_eigensystem(self):
        # lazy O(n^3) decomposition, amortised to ~O(n^2) per evaluation
        gap = 0.5 * self.popsize / ((self.c1 + self.cmu) * self.dim)
        if self.counteval - self._eigen_at < gap and self.counteval > 0:
            return
        self._eigen_at = self.counteval
        self.cov = 0.5 * (self.cov + self.cov.T)
        vals, basis = eigh(self.cov, check_finite=False)
        vals = np.maximum(vals, 1e-12)  # covariance repair on numerical breakdown
        self.eigen_values = vals
        self.eigen_basis = basis
        self.inv_sqrt_cov = (basis / np.sqrt(vals)) @ basis.T

    def ask(self) -> np.ndarray:
        """Sample a (popsize, dim) array of candidates."""
        self._update_eigensystem()
        z = self.rng.standard_normal((self.popsize, self.dim))
        y = (z * np.sqrt(self.eigen_values)) @ self.eigen_basis.T
        return self.mean + self.sigma * y

    def tell(self, candidates: np.ndarray, fitness) -> None:
        """Rank by fitness (lower is better) and update the distribution."""
        fitness = np.asarray(fitness, dtype=float)
        self.counteval += fitness.size
        order = np.argsort(fitness)
        parents = np.asarray(candidates, dtype=float)[order[: self.num_parents]]

        old_mean = self.mean
        self.mean = self.weights @ parents
        y = (self.mean - old_mean) / self.sigma

        cs, cc, n = self.cs, self.cc, self.dim
        self.path_s = (1 - cs) * self.path_s + \
            math.sqrt(cs * (2 - cs) * self.mueff) * (self.inv_sqrt_cov @ y)
        denom = math.sqrt(1 - (1 - cs) ** (2 * self.counteval / self.popsize))
        hsig = float(np.linalg.norm(self.path_s)) / denom / self.chi_n < 1.4 + 2 / (n + 1)
        self.path_c = (1 - cc) * self.path_c + \
            hsig * math.sqrt(cc * (2 - cc) * self.mueff) * y

        yk = (parents - old_mean) / self.sigma
        rank_mu = (yk.T * self.weights) @ yk
        delta_hsig = (1 - hsig) * cc * (2 - cc)
        self.cov = ((1 - self.c1 - self.cmu) * self.cov
                    + self.c1 * (np.outer(self.path_c, self.path_c) + delta_hsig * self.cov)
                    + self.cmu * rank_mu)
        self.sigma *= math.exp(
            (cs / self.damps) * (float(np.linalg.norm(self.path_s)) / self.chi_n - 1)
        )


def cmaes_run(objective, w0, sigma_init: float, num_evals: int,
              rng: np.random.Generator, popsize: int | None = None) -> RunResult:
    """Maximise the objective with CMA-ES under an exact evaluation budget.

    The final generation is truncated if the budget does not cover a full
    population; the distribution is then left un-updated and the best of the
    evaluated partial generation still enters the incumbent trace.
    """
    w0 = np.asarray(w0, dtype=float)
    if num_evals < 1:
        raise ValueError("num_evals must be >= 1")
    es = CmaEs(w0, sigma_init, rng, popsize=popsize)
    records: list[LapRecord] = []
    best_w, best_r = w0.copy(), -math.inf
    lap = 0
    while lap < num_evals:
        cands = es.ask()
        k = min(es.popsize, num_evals - lap)
        rewards = np.empty(k)
        for i in range(k):
            r = float(objective(cands[i]))
            rewards[i] = r
            lap += 1
            if r > best_r:
                best_w, best_r = cands[i].copy(), r
            records.append(LapRecord(lap, cands[i].copy(), r, best_r, 0, 0.0))
        if k < es.popsize:
            break
        es.tell(cands, -rewards)
    return RunResult(Incumbent(best_w, best_r), records)


def maximize_acquisition_cmaes(f_batch, start: np.ndarray, budget: SearchBudget,
                               rng: np.random.Generator,
                               box: tuple[np.ndarray, np.ndarray] | None = None,
                               sigma: float = 1.0,
                               popsize: int | None = None) -> np.ndarray:
    """Global acquisition search with CMA-ES until the budget is exhausted.

    ``f_batch`` maps a (k, M) array to k values. Candidates outside the box
    are evaluated at their clipped positions (penalty-free repair). Returns
    the best point actually evaluated, never worse than ``start``.
    """
    start = np.asarray(start, dtype=float)
    es = CmaEs(start, sigma, rng, popsize=popsize)
    best_w = start.copy()
    if not budget.spend():
        return best_w
    best_v = float(f_batch(start[None, :])[0])
    while True:
        k = min(es.popsize, budget.remaining)
        if k == 0:
            break
        cands = es.ask()
        clipped = cands if box is None else np.clip(cands, box[0], box[1])
        vals = np.asarray(f_batch(clipped[:k]), dtype=float)
        budget.spend(k)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_w, best_v = clipped[i].copy(), float(vals[i])
        if k < es.popsize:
            break
        es.tell(cands, -vals)
    return best_w


def plain_bo_run(objective, w0, sigma0: float, warm_starts: int, laps: int,
                 spec: AcquisitionSpec, rng: np.random.Generator,
                 af_budget: int = 50_000, adapt_every: int = 10,
                 noise_variance: float = 0.0, box_radius: float = 10.0,
                 popsize: int | None = None) -> RunResult:
    """Standard BO: per-lap proposal maximises the acquisition with CMA-ES.

    Same protocol as the coordinate-descent loop (warm starts, one candidate
    per lap, exactly ``laps`` objective evaluations) but the acquisition is
    searched globally over all M dimensions at once, starting from the
    incumbent.
    """
    w0 = np.asarray(w0, dtype=float)
    if warm_starts < 1:
        raise ValueError("need at least one warm-start sample")
    if laps < warm_starts:
        raise ValueError("laps must be >= warm_starts")

    m = w0.size
    box = (w0 - box_radius * sigma0, w0 + box_radius * sigma0)
    af_sigma = max(2.0 * sigma0, 1e-8)
    records: list[LapRecord] = []
    inputs = np.empty((0, m))
    targets = np.empty(0)
    best_w, best_r = None, -math.inf

    def observe(w, lap, af_evals, wall_ms):
        nonlocal inputs, targets, best_w, best_r
        r = float(objective(w))
        if r > best_r:
            best_w, best_r = w.copy(), r
        inputs = np.vstack([inputs, w])
        targets = np.append(targets, r)
        records.append(LapRecord(lap, w.copy(), r, best_r, af_evals, wall_ms))

    for s in range(warm_starts):
        observe(w0 + sigma0 * rng.standard_normal(m), s + 1, 0, 0.0)

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

        def f_batch(W, model=model, best=best_r):
            return acquisition(model, spec, W, best=best)

        t0 = time.perf_counter()
        w_next = maximize_acquisition_cmaes(
            f_batch, best_w, budget, rng, box=box, sigma=af_sigma, popsize=popsize
        )
        pending_wall = (time.perf_counter() - t0) * 1e3
        pending_af = budget.evals_used

    return RunResult(Incumbent(best_w, best_r), records, model=model)


@dataclass(frozen=True)
class Embedding:
    """Random linear map from a low-dimensional box into weight space."""

    matrix: np.ndarray        # (M, d), standard-normal entries drawn per run
    origin: np.ndarray        # (M,) weights the embedding is centred on
    box_halfwidth: float      # search box [-s, s]^d in the low-dim space

    def to_weights(self, y: np.ndarray) -> np.ndarray:
        return self.origin + self.matrix @ np.asarray(y, dtype=float)


def rembo_run(objective, w0, embed_dim: int, warm_starts: int, laps: int,
              rng: np.random.Generator,
              spec: AcquisitionSpec | None = None,
              af_budget: int = 50_000, adapt_every: int = 10,
              noise_variance: float = 0.0,
              w_halfwidth: float | None = None,
              embedding_matrix: np.ndarray | None = None) -> RunResult:
    """BO over a random low-dimensional embedding of the weight space.

    The surrogate lives in the d-dimensional box [-sqrt(d), sqrt(d)]^d; each
    candidate y is mapped to w = w0 + A y before the episode runs. The first
    warm-start sample is y = 0, i.e. the initial weights themselves, so the
    method starts from the same known-good solution as the others. When
    ``w_halfwidth`` is set, mapped weights are clamped into
    [w0 - w_halfwidth, w0 + w_halfwidth] componentwise.
    """
    w0 = np.asarray(w0, dtype=float)
    m = w0.size
    if embed_dim < 1 or embed_dim > m:
        raise ValueError(f"embedding dimension must be in [1, {m}], got {embed_dim}")
    if warm_starts < 1:
        raise ValueError("need at least one warm-start sample")
    if laps < warm_starts:
        raise ValueError("laps must be >= warm_starts")
    if spec is None:
        spec = AcquisitionSpec(kind="ei")

    a = embedding_matrix if embedding_matrix is not None \
        else rng.standard_normal((m, embed_dim))
    s = math.sqrt(embed_dim)
    embedding = Embedding(matrix=np.asarray(a, dtype=float), origin=w0, box_halfwidth=s)
    y_box = (np.full(embed_dim, -s), np.full(embed_dim, s))

    def to_weights(y):
        w = embedding.to_weights(y)
        if w_halfwidth is not None:
            w = np.clip(w, w0 - w_halfwidth, w0 + w_halfwidth)
        return w

    records: list[LapRecord] = []
    ys = np.empty((0, embed_dim))
    targets = np.empty(0)
    best_y = np.zeros(embed_dim)
    best_w, best_r = None, -math.inf

    def observe(y, lap, af_evals, wall_ms):
        nonlocal ys, targets, best_y, best_w, best_r
        w = to_weights(y)
        r = float(objective(w))
        if r > best_r:
            best_y, best_w, best_r = y.copy(), w.copy(), r
        ys = np.vstack([ys, y])
        targets = np.append(targets, r)
        records.append(LapRecord(lap, w.copy(), r, best_r, af_evals, wall_ms))

    observe(np.zeros(embed_dim), 1, 0, 0.0)
    for i in range(1, warm_starts):
        observe(rng.uniform(-s, s, size=embed_dim), i + 1, 0, 0.0)

    kernel = _initial_surrogate_kernel(embed_dim, s / 2.0, targets)
    model = gp_fit(kernel, noise_variance, ys, targets)
    bounds = default_bounds(kernel)
    if model.num_observations >= 2:
        model = adapt_hyperparams(model, bounds)

    y_next = best_y.copy()
    pending_af, pending_wall = 0, 0.0
    for lap in range(warm_starts, laps):
        observe(y_next, lap + 1, pending_af, pending_wall)
        model = gp_update(model, y_next, targets[-1])
        if model.num_observations % adapt_every == 0 and model.num_observations >= 2:
            model = adapt_hyperparams(model, bounds)
        if lap == laps - 1:
            break
        budget = SearchBudget(af_budget)

        def f_batch(Y, model=model, best=best_r):
            return acquisition(model, spec, Y, best=best)

        t0 = time.perf_counter()
        y_next = maximize_acquisition_cmaes(
            f_batch, best_y, budget, rng, box=y_box, sigma=s / 4.0
        )
        pending_wall = (time.perf_counter() - t0) * 1e3
        pending_af = budget.evals_used

    return RunResult(Incumbent(best_w, best_r), records, model=model)


def random_search_run(objective, w0, sigma0: float, num_evals: int,
                      rng: np.random.Generator) -> RunResult:
    """Floor baseline: i.i.d. Normal(w0, sigma0^2 I) samples."""
    w0 = np.asarray(w0, dtype=float)
    if num_evals < 1:
        raise ValueError("num_evals must be >= 1")
    records: list[LapRecord] = []
    best_w, best_r = None, -math.inf
    for lap in range(num_evals):
        w = w0 + sigma0 * rng.standard_normal(w0.size)
        r = float(objective(w))
        if r > best_r:
            best_w, best_r = w.copy(), r
        records.append(LapRecord(lap + 1, w, r, best_r, 0, 0.0))
    return RunResult(Incumbent(best_w, best_r), records)
