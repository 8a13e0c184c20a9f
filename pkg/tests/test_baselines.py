import math

import numpy as np
import pytest

from racebo.baselines import (
    CmaEs,
    cmaes_run,
    maximize_acquisition_cmaes,
    plain_bo_run,
    random_search_run,
    rembo_run,
)
from racebo.search import AcquisitionSpec, SearchBudget


def sphere_max(center):
    center = np.asarray(center, dtype=float)

    def f(w):
        d = w - center
        return -float(d @ d)

    return f


class TestCmaEs:
    def test_sphere_reaches_optimum(self):
        c = np.array([0.5, -1.0, 2.0, 0.0, -0.3])
        res = cmaes_run(sphere_max(c), np.zeros(5), 0.5, 2000,
                        np.random.default_rng(0))
        assert np.abs(res.incumbent.weights - c).max() < 1e-2
        assert len(res.laps) == 2000

    def test_budget_smaller_than_one_generation(self):
        res = cmaes_run(sphere_max([1.0, 1.0]), np.zeros(2), 0.3, 3,
                        np.random.default_rng(1))
        assert len(res.laps) == 3
        rewards = [r.reward for r in res.laps]
        assert res.incumbent.reward == max(rewards)

    def test_exact_evaluation_count_and_trace(self):
        calls = []
        f = sphere_max([0.2, 0.2, 0.2])

        def counted(w):
            calls.append(1)
            return f(w)

        res = cmaes_run(counted, np.zeros(3), 0.4, 157, np.random.default_rng(2))
        assert len(calls) == 157
        assert len(res.laps) == 157
        curve = [r.incumbent_reward for r in res.laps]
        assert all(a <= b for a, b in zip(curve, curve[1:]))

    def test_deterministic_given_seed(self):
        f = sphere_max([1.0, -1.0])
        a = cmaes_run(f, np.zeros(2), 0.3, 100, np.random.default_rng(5))
        b = cmaes_run(f, np.zeros(2), 0.3, 100, np.random.default_rng(5))
        for ra, rb in zip(a.laps, b.laps):
            assert np.array_equal(ra.weights, rb.weights)
            assert ra.reward == rb.reward

    def test_default_population_size(self):
        es = CmaEs(np.zeros(10), 0.5, np.random.default_rng(0))
        assert es.popsize == 4 + int(3 * math.log(10))

    def test_covariance_repair_keeps_running(self):
        # a degenerate objective collapses the distribution; eigenvalues are
        # clamped and the strategy must keep producing finite candidates
        def flat(w):
            return 0.0

        res = cmaes_run(flat, np.zeros(3), 1e-9, 200, np.random.default_rng(3))
        assert len(res.laps) == 200
        assert np.isfinite(res.laps[-1].weights).all()


class TestMaximizeAcquisitionCmaes:
    def test_separable_quadratic_full_budget(self):
        c = np.array([0.4, -0.2, 0.15])

        def f_batch(W):
            d = W - c
            return -np.einsum("ij,ij->i", d, d)

        budget = SearchBudget(4000)
        out = maximize_acquisition_cmaes(f_batch, np.zeros(3), budget,
                                         np.random.default_rng(0),
                                         sigma=0.3)
        assert np.abs(out - c).max() < 1e-2
        assert budget.evals_used <= 4000

    def test_stays_inside_box(self):
        c = np.array([5.0, 5.0])

        def f_batch(W):
            d = W - c
            return -np.einsum("ij,ij->i", d, d)

        box = (np.full(2, -1.0), np.full(2, 1.0))
        out = maximize_acquisition_cmaes(f_batch, np.zeros(2), SearchBudget(2000),
                                         np.random.default_rng(1), box=box,
                                         sigma=0.5)
        assert np.all(out >= -1.0) and np.all(out <= 1.0)
        assert np.abs(out - 1.0).max() < 0.05  # box corner is the constrained optimum

    def test_never_worse_than_start(self):
        def f_batch(W):
            return -np.einsum("ij,ij->i", W, W)  # start is already optimal

        out = maximize_acquisition_cmaes(f_batch, np.zeros(4), SearchBudget(500),
                                         np.random.default_rng(2), sigma=1.0)
        assert np.array_equal(out, np.zeros(4))


def quadratic_objective(center, scale=1.0):
    center = np.asarray(center, dtype=float)

    def f(w):
        d = w - center
        return scale * math.exp(-float(d @ d))

    return f


class TestPlainBoRun:
    def test_warm_start_only(self):
        f = quadratic_objective([0.1, 0.1])
        res = plain_bo_run(f, np.zeros(2), 0.05, 5, 5, AcquisitionSpec(),
                           np.random.default_rng(0))
        assert len(res.laps) == 5
        assert res.incumbent.reward == max(r.reward for r in res.laps)

    def test_protocol_and_budget(self):
        f = quadratic_objective([0.05, -0.05])
        calls = []

        def counted(w):
            calls.append(1)
            return f(w)

        res = plain_bo_run(counted, np.zeros(2), 0.05, 4, 12, AcquisitionSpec(),
                           np.random.default_rng(1), af_budget=3000)
        assert len(calls) == 12
        assert all(r.af_evals <= 3000 for r in res.laps)
        curve = [r.incumbent_reward for r in res.laps]
        assert all(a <= b for a, b in zip(curve, curve[1:]))

    def test_exploitation_stays_in_box(self):
        # beta=0 exploits the single observed optimum; proposals remain boxed
        f = quadratic_objective([0.0, 0.0])
        sigma0 = 0.05
        res = plain_bo_run(f, np.zeros(2), sigma0, 5, 10,
                           AcquisitionSpec("ucb", beta=0.0),
                           np.random.default_rng(2), af_budget=2000)
        for rec in res.laps:
            assert np.all(np.abs(rec.weights) <= 10 * sigma0 + 1e-9)

    def test_deterministic(self):
        f = quadratic_objective([0.02, 0.03])
        a = plain_bo_run(f, np.zeros(2), 0.05, 3, 8, AcquisitionSpec(),
                         np.random.default_rng(7), af_budget=1000)
        b = plain_bo_run(f, np.zeros(2), 0.05, 3, 8, AcquisitionSpec(),
                         np.random.default_rng(7), af_budget=1000)
        for ra, rb in zip(a.laps, b.laps):
            assert np.array_equal(ra.weights, rb.weights)


class TestRemboRun:
    def test_identity_embedding_recovers_low_dim_optimum(self):
        # d = M with the identity embedding behaves like BO in weight space
        f = quadratic_objective([0.3, -0.2])
        res = rembo_run(f, np.zeros(2), 2, 6, 40, np.random.default_rng(0),
                        af_budget=2000, embedding_matrix=np.eye(2))
        assert res.incumbent.reward > 0.8  # optimum value is 1.0

    def test_y_zero_reproduces_origin_reward(self):
        f = quadratic_objective([0.0, 0.0, 0.0])
        w0 = np.array([0.1, -0.2, 0.05])
        expected = f(w0)
        res = rembo_run(f, w0, 2, 3, 3, np.random.default_rng(1))
        # first warm-start sample is y = 0, i.e. exactly w0
        assert res.laps[0].reward == expected
        assert np.array_equal(res.laps[0].weights, w0)

    def test_single_relevant_coordinate(self):
        # objective depends only on w[0]; the oracle is a fine 1-D grid over
        # the coordinate's reachable range under the embedding
        m, d = 12, 5
        rng = np.random.default_rng(2)
        a = rng.standard_normal((m, d))
        w0 = np.zeros(m)

        def f(w):
            return math.exp(-((w[0] - 0.8) ** 2))

        s = math.sqrt(d)
        reach = s * np.abs(a[0]).sum()
        grid = np.linspace(-reach, reach, 4001)
        oracle_best = np.exp(-((grid - 0.8) ** 2)).max()

        res = rembo_run(f, w0, d, 10, 100, np.random.default_rng(3),
                        af_budget=2000, embedding_matrix=a)
        assert res.incumbent.reward >= 0.95 * oracle_best

    def test_w_halfwidth_clamps_candidates(self):
        f = quadratic_objective([0.0, 0.0])
        res = rembo_run(f, np.zeros(2), 2, 5, 15, np.random.default_rng(4),
                        af_budget=1000, w_halfwidth=0.3)
        for rec in res.laps:
            assert np.all(np.abs(rec.weights) <= 0.3 + 1e-12)

    def test_rejects_oversized_embedding(self):
        with pytest.raises(ValueError):
            rembo_run(lambda w: 0.0, np.zeros(3), 5, 2, 4, np.random.default_rng(0))


class TestRandomSearchRun:
    def test_zero_sigma_gives_constant_rewards(self):
        f = quadratic_objective([0.1])
        res = random_search_run(f, np.array([0.0]), 0.0, 5, np.random.default_rng(0))
        rewards = {r.reward for r in res.laps}
        assert rewards == {f(np.array([0.0]))}

    def test_single_evaluation(self):
        f = quadratic_objective([0.0, 0.0])
        res = random_search_run(f, np.zeros(2), 0.5, 1, np.random.default_rng(1))
        assert len(res.laps) == 1
        assert res.incumbent.reward == res.laps[0].reward

    def test_replay_oracle(self):
        # replaying the same seeded stream must reproduce the run exactly
        f = quadratic_objective([0.25])
        res = random_search_run(f, np.array([0.0]), 0.3, 300,
                                np.random.default_rng(9))
        rng = np.random.default_rng(9)
        best = -math.inf
        for rec in res.laps:
            w = 0.3 * rng.standard_normal(1)
            assert np.array_equal(rec.weights, w)
            r = f(w)
            best = max(best, r)
            assert rec.reward == r
            assert rec.incumbent_reward == best
        assert res.incumbent.reward == best

    def test_nondecreasing_incumbent(self):
        f = quadratic_objective([0.0, 0.1, -0.1])
        res = random_search_run(f, np.zeros(3), 0.2, 50, np.random.default_rng(3))
        curve = [r.incumbent_reward for r in res.laps]
        assert all(a <= b for a, b in zip(curve, curve[1:]))
