#!/usr/bin/env python3
"""Coordinate-descent Bayesian optimisation of a lap-time policy.

Runs the full loop on the bundled oval: demonstration, ridge fit, warm
starts, then per-lap coordinate sweeps over the UCB surface. Takes around
ten seconds.
"""

import numpy as np

from racebo import (
    AcquisitionSpec,
    CarParams,
    FeatureMap,
    Policy,
    builtin_track,
    cdbo_run,
    demo_controller,
    fit_initial_weights,
    pi_reference_result,
    simulate_lap,
)

track = builtin_track("oval-500")
params = CarParams()
target = 15.0
kernels = 10
laps = 80

demo = demo_controller(track, params, target)
fm = FeatureMap.regular(kernels)
w0 = fit_initial_weights(fm, demo, ridge=1e-3)
demo_reward = pi_reference_result(track, params, target).reward
print(f"demonstration reward: {demo_reward:.3f} m/s")

def objective(w):
    return simulate_lap(track, params, Policy(fm, w)).reward

result = cdbo_run(objective, fm, w0, sigma0=0.02, warm_starts=10, laps=laps,
                  spec=AcquisitionSpec("ucb", beta=1.0),
                  rng=np.random.default_rng(0))

print(f"\n{'lap':>4} {'reward':>8} {'best':>8} {'af evals':>9}")
for rec in result.laps:
    if rec.lap % 10 == 0 or rec.lap == 1:
        print(f"{rec.lap:4d} {rec.reward:8.3f} {rec.incumbent_reward:8.3f} "
              f"{rec.af_evals:9d}")

best = result.incumbent
print(f"\nbest reward {best.reward:.3f} m/s "
      f"({100 * (best.reward / demo_reward - 1):+.1f}% over the demonstration)")

replay = simulate_lap(track, params, Policy(fm, best.weights), trace_stride=400)
print("best policy replay, sampled (x, action, speed):")
for x, a, v in replay.trace:
    print(f"  x={x:5.2f} a={a:6.3f} v={v:5.1f}")
