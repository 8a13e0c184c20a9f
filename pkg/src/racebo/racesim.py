"""Deterministic longitudinal lap simulator.

A point-mass car driving along the centre line of a track made of constant-
curvature segments. The policy controls the combined throttle/brake action;
lateral dynamics are folded into a friction-circle constraint: the combined
lateral demand v^2 * kappa and longitudinal acceleration must stay inside
the tyre budget, otherwise the car leaves the track and the episode fails.

Reward of a lap is average speed L/T for a completed lap and 0 otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .kernels import KernelFamily, _correlation
from .policy import Demonstration, Policy

BUILTIN_TRACKS = ("forza-analog", "oval-500")


class TrackFormatError(ValueError):
    """Raised when a track file does not parse."""


class DemonstrationError(RuntimeError):
    """Raised when the demonstration controller cannot complete a valid lap."""


class FailureReason(enum.Enum):
    NONE = "none"
    FRICTION_VIOLATION = "friction_violation"
    TIMEOUT = "timeout"
    STALLED = "stalled"


@dataclass(frozen=True)
class Track:
    """Ordered constant-curvature segments; curvature 0 means straight."""

    lengths: np.ndarray      # (n,) metres
    curvatures: np.ndarray   # (n,) 1/metres
    width: float = 10.0      # metres, metadata only
    name: str = ""

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float).ravel()
        curv = np.abs(np.asarray(self.curvatures, dtype=float).ravel())
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "curvatures", curv)
        if lengths.size == 0:
            raise ValueError("track needs at least one segment")
        if np.any(lengths <= 0):
            raise ValueError("segment lengths must be > 0")
        if not np.all(np.isfinite(curv)):
            raise ValueError("curvatures must be finite")
        object.__setattr__(self, "_ends", np.cumsum(lengths))

    @property
    def length(self) -> float:
        return float(self._ends[-1])

    @property
    def num_segments(self) -> int:
        return self.lengths.size


@dataclass(frozen=True)
class CarParams:
    mass: float = 1150.0              # kg
    max_drive_force: float = 6000.0   # N
    max_brake_force: float = 9000.0   # N
    drag_coeff: float = 0.75          # N s^2 / m^2
    mu_g: float = 12.0                # m/s^2, combined tyre budget
    v_max_engine: float = 80.0        # m/s
    timestep: float = 0.01            # s
    timeout: float = 900.0            # s

    def __post_init__(self):
        for name in ("mass", "max_drive_force", "max_brake_force", "drag_coeff",
                     "mu_g", "v_max_engine", "timestep", "timeout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.timestep > 0.05:
            raise ValueError("timestep must be <= 0.05 s")


@dataclass(frozen=True)
class EpisodeResult:
    completed: bool
    lap_time: float         # seconds; inf when not completed
    reward: float           # m/s; L/lap_time when completed, else 0
    trace: np.ndarray       # (k, 3) sampled (x, action, speed) rows
    failure_reason: FailureReason
    failure_position: float = math.nan  # metres along track, for failures


def load_track(source, name: str = "") -> Track:
    """Parse a track file: one "length_m curvature_per_m" pair per line.

    '#' starts a comment. A comment of the form "# width: <metres>" sets the
    width metadata.
    """
    path = Path(source)
    lengths, curvatures = [], []
    width = 10.0
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        comment = raw.split("#", 1)[1] if "#" in raw else ""
        if comment.strip().lower().startswith("width:"):
            width = float(comment.split(":", 1)[1])
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TrackFormatError(f"{path}:{lineno}: expected 'length curvature', got {raw!r}")
        try:
            length, curvature = float(parts[0]), float(parts[1])
        except ValueError:
            raise TrackFormatError(f"{path}:{lineno}: non-numeric value in {raw!r}") from None
        if length <= 0:
            raise TrackFormatError(f"{path}:{lineno}: segment length must be > 0, got {length}")
        lengths.append(length)
        curvatures.append(curvature)
    if not lengths:
        raise TrackFormatError(f"{path}: no segments found")
    return Track(np.array(lengths), np.array(curvatures), width=width, name=name or path.stem)


def save_track(track: Track, path) -> None:
    lines = [f"# width: {track.width:.17g}"]
    for length, curvature in zip(track.lengths, track.curvatures):
        lines.append(f"{length:.17g} {curvature:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def builtin_track(name: str) -> Track:
    """One of the bundled tracks, by name ("forza-analog" or "oval-500")."""
    if name not in BUILTIN_TRACKS:
        raise ValueError(f"unknown builtin track {name!r}; choose from {BUILTIN_TRACKS}")
    ref = resources.files("racebo").joinpath(f"tracks/{name}.txt")
    with resources.as_file(ref) as path:
        return load_track(path, name=name)


def curvature_speed_limit(params: CarParams, curvature: float) -> float:
    """Highest steady cornering speed: lateral demand alone fills the budget."""
    if curvature <= 0:
        return params.v_max_engine
    return min(params.v_max_engine, math.sqrt(params.mu_g / curvature))


_STALL_SECONDS = 5.0


def _run_episode(track: Track, params: CarParams, action_fn, trace_stride) -> EpisodeResult:
    """Shared fixed-step integrator; action_fn(x, v, t) -> a in [-1, 1]."""
    dt = params.timestep
    total = track.length
    # plain Python floats keep the per-step arithmetic off numpy scalars
    ends = [float(e) for e in track._ends]
    curvatures = [float(k) for k in track.curvatures]
    mass = params.mass
    drive = params.max_drive_force
    brake = params.max_brake_force
    drag = params.drag_coeff
    mu_sq = params.mu_g * params.mu_g
    v_max = params.v_max_engine

    s = 0.0
    v = 0.0
    t = 0.0
    seg = 0
    stall = 0.0
    step = 0
    rows = [] if trace_stride else None

    while True:
        x = s / total
        a = action_fn(x, v, t)
        if rows is not None and step % trace_stride == 0:
            rows.append((x, a, v))

        while s >= ends[seg]:  # segments advance monotonically with s
            seg += 1
        kappa = curvatures[seg]

        force = a * drive if a >= 0.0 else a * brake
        accel = (force - drag * v * v) / mass
        v_new = v + accel * dt
        if v_new < 0.0:
            v_new = 0.0  # the car does not reverse
        elif v_new > v_max:
            v_new = v_max
        accel_real = (v_new - v) / dt

        lateral = v * v * kappa
        if lateral * lateral + accel_real * accel_real > mu_sq:
            return EpisodeResult(False, math.inf, 0.0, _trace(rows),
                                 FailureReason.FRICTION_VIOLATION, failure_position=s)

        v = v_new
        s_prev = s
        s += v * dt
        t += dt
        step += 1

        if s >= total:
            lap_time = t - dt + (total - s_prev) / v
            return EpisodeResult(True, lap_time, total / lap_time, _trace(rows),
                                 FailureReason.NONE)
        if t >= params.timeout:
            return EpisodeResult(False, math.inf, 0.0, _trace(rows), FailureReason.TIMEOUT)
        if v <= 1e-12 and a <= 0.0:
            stall += dt
            if stall >= _STALL_SECONDS:
                return EpisodeResult(False, math.inf, 0.0, _trace(rows),
                                     FailureReason.STALLED, failure_position=s)
        else:
            stall = 0.0


def _trace(rows) -> np.ndarray:
    if not rows:
        return np.empty((0, 3))
    return np.asarray(rows, dtype=float)


def simulate_lap(track: Track, params: CarParams, policy: Policy,
                 trace_stride: int | None = None) -> EpisodeResult:
    """Run one lap under the policy from a standing start at the line.

    Pure function of its inputs: identical arguments give a bit-identical
    result. ``trace_stride`` records every k-th step into the result trace
    (None records nothing, which is the fast path used by the optimisers).
    """
    fm = policy.features
    inducing = fm.inducing_points
    ls = float(fm.kernel.length_scales[0])
    sv = fm.kernel.signal_variance
    family = fm.kernel.family
    weights = policy.weights if sv == 1.0 else sv * policy.weights

    # inlined feature_vector: same kernels, skips per-step revalidation
    if family is KernelFamily.MATERN3:
        c = math.sqrt(3.0) / ls

        def act(x, v, t):
            r = np.abs(x - inducing) * c
            a = float(weights @ ((1.0 + r) * np.exp(-r)))
            return min(max(a, -1.0), 1.0)
    else:
        def act(x, v, t):
            r = np.abs(x - inducing) / ls
            a = float(weights @ _correlation(family, r * r))
            return min(max(a, -1.0), 1.0)

    return _run_episode(track, params, act, trace_stride)


_PI_KP = 0.5
_PI_KI = 0.05          # per second
_PI_INTEGRAL_CLAMP = 1.0


def _pi_episode(track: Track, params: CarParams, v_target: float):
    """Drive one lap with the speed-hold PI law; raises on any failure."""
    for kappa in track.curvatures:
        limit = curvature_speed_limit(params, kappa)
        if v_target >= limit:
            raise DemonstrationError(
                f"target speed {v_target} m/s is not below the "
                f"{limit:.2f} m/s curvature limit (kappa={kappa:.5f})"
            )

    integral = 0.0
    xs, actions = [], []

    def pi_law(x, v, t):
        nonlocal integral
        err = v_target - v
        integral = min(max(integral + err * params.timestep, -_PI_INTEGRAL_CLAMP),
                       _PI_INTEGRAL_CLAMP)
        a = min(max(_PI_KP * err + _PI_KI * integral, -1.0), 1.0)
        xs.append(x)
        actions.append(a)
        return a

    result = _run_episode(track, params, pi_law, trace_stride=None)
    if not result.completed:
        raise DemonstrationError(
            f"demonstration lap failed ({result.failure_reason.value}) "
            f"at target speed {v_target} m/s"
        )
    return result, xs, actions


def demo_controller(track: Track, params: CarParams, v_target: float = 15.0,
                    sample_stride: int = 1) -> Demonstration:
    """Record the speed-hold PI controller driving one lap at ``v_target``.

    The target must sit below every corner's curvature speed limit; an
    infeasible target, or a lap the controller fails to complete, is an
    error because downstream fitting requires a valid demonstration.
    """
    _, xs, actions = _pi_episode(track, params, v_target)
    return Demonstration(positions=np.asarray(xs[::sample_stride]),
                         actions=np.asarray(actions[::sample_stride]))


def pi_reference_result(track: Track, params: CarParams,
                        v_target: float = 15.0) -> EpisodeResult:
    """Episode result of the demonstration lap itself (the reward every
    optimiser is trying to beat)."""
    result, _, _ = _pi_episode(track, params, v_target)
    return result
