#!/usr/bin/env python3
"""The longitudinal race simulator and its failure modes.

Shows the curvature speed limits of the bundled circuit, then runs a few
hand-built policies: a feasible cruise, an overdriven lap that trips the
friction circle in a corner, and a lap that never gets moving.
"""

import numpy as np

from racebo import (
    CarParams,
    FeatureMap,
    Policy,
    builtin_track,
    curvature_speed_limit,
    simulate_lap,
)

track = builtin_track("forza-analog")
params = CarParams()
print(f"track: {track.length:.0f} m, {track.num_segments} segments, "
      f"width {track.width:.0f} m")

print("\nsegment speed limits:")
start = 0.0
for length, kappa in zip(track.lengths, track.curvatures):
    limit = curvature_speed_limit(params, kappa)
    kind = "straight" if kappa == 0 else f"corner r={1/kappa:6.0f} m"
    print(f"  x={start/track.length:5.2f} {kind:18s} limit {limit:5.1f} m/s")
    start += length

def flat_policy(action):
    return Policy(FeatureMap.regular(1, length_scale=1e9), np.array([action]))

print("\nconstant-throttle laps:")
for a in (0.05, 0.1, 0.2):
    res = simulate_lap(track, params, flat_policy(a))
    if res.completed:
        print(f"  a={a:4.2f}: completed, lap {res.lap_time:7.2f} s, "
              f"reward {res.reward:6.3f} m/s")
    else:
        print(f"  a={a:4.2f}: {res.failure_reason.value} at "
              f"{res.failure_position:7.1f} m (x={res.failure_position/track.length:.3f})")

res = simulate_lap(track, params, flat_policy(0.0))
print(f"  a=0.00: {res.failure_reason.value} (the car never moves)")

# a crude hand-shaped policy: launch, cruise, brake into the sharp corners
fm = FeatureMap.regular(20)
w = np.full(20, 0.022)
w[7:9] = -0.02         # brake around x ~ 0.37-0.42 (sharp corners)
w[0] = 0.3             # get off the line
res = simulate_lap(track, params, Policy(fm, w), trace_stride=1000)
print("\nhand-shaped policy:",
      "completed" if res.completed else res.failure_reason.value,
      f"reward {res.reward:.3f} m/s")
print("sampled (x, action, speed):")
for x, a, v in res.trace[::4]:
    print(f"  x={x:5.2f} a={a:6.3f} v={v:5.1f}")
