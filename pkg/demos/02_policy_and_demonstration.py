#!/usr/bin/env python3
"""From a recorded demonstration to an initial policy.

Drives the demonstration controller around the bundled oval, fits policies
with different kernel counts to the recorded actions and reports how well
each reproduces the demonstration, both pointwise and when re-simulated.
"""

import numpy as np

from racebo import (
    CarParams,
    FeatureMap,
    Policy,
    builtin_track,
    demo_controller,
    feature_matrix,
    fit_initial_weights,
    pi_reference_result,
    simulate_lap,
)

track = builtin_track("oval-500")
params = CarParams()
target = 15.0

demo = demo_controller(track, params, target)
reference = pi_reference_result(track, params, target)
print(f"demonstration: {len(demo)} samples, lap time {reference.lap_time:.2f} s, "
      f"reward {reference.reward:.3f} m/s")

print(f"\n{'kernels':>8} {'fit rmse':>10} {'replay reward':>14}")
for m in (5, 10, 20, 40):
    fm = FeatureMap.regular(m)
    w0 = fit_initial_weights(fm, demo, ridge=1e-3)
    fitted = feature_matrix(fm, demo.positions) @ w0
    rmse = float(np.sqrt(np.mean((fitted - demo.actions) ** 2)))
    replay = simulate_lap(track, params, Policy(fm, w0))
    print(f"{m:8d} {rmse:10.5f} {replay.reward:14.3f}")

fm = FeatureMap.regular(20)
w0 = fit_initial_weights(fm, demo, ridge=1e-3)
print("\naction profile of the 20-kernel fit:")
print(f"{'x':>5} {'recorded':>9} {'fitted':>9}")
policy = Policy(fm, w0)
for x in np.linspace(0, 0.95, 12):
    i = int(np.searchsorted(demo.positions, x))
    recorded = demo.actions[min(i, len(demo) - 1)]
    fitted = float(w0 @ feature_matrix(fm, [x])[0])
    print(f"{x:5.2f} {recorded:9.4f} {fitted:9.4f}")
