"""Experiment orchestration: configs, runs, aggregation and file outputs.

A run is fully described by a flat key=value config plus a seed list; the
pipeline per seed is demonstration lap -> ridge fit of initial weights ->
method runner. Outputs are plain CSV/JSON so that a manifest plus the seeds
reproduce every result byte. Proposal wall time is kept in a separate
timing file because it is the one quantity that is not reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import cmaes_run, plain_bo_run, random_search_run, rembo_run
from .policy import FeatureMap, Policy, fit_initial_weights
from .racesim import (
    BUILTIN_TRACKS,
    CarParams,
    Track,
    builtin_track,
    demo_controller,
    load_track,
    pi_reference_result,
    simulate_lap,
)
from .search import AcquisitionSpec, LapRecord, cdbo_run

METHODS = ("cdbo", "cmaes", "bo-cmaes", "rembo-5d", "rembo-10d", "random")

# the bundled CMA-ES is the standard strategy, not the active variant
_METHOD_LABELS = {"cmaes": "cmaes-std"}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def method_label(method: str) -> str:
    return _METHOD_LABELS.get(method, method)


@dataclass(frozen=True)
class ExperimentConfig:
    track: str = "oval-500"
    method: str = "cdbo"
    kernels: int = 10
    laps: int = 300
    warm_starts: int = 10
    repeats: int = 4
    seeds: tuple[int, ...] = ()
    beta: float = 1.0
    sigma0: float | None = None       # absolute; None defers to sigma0_rel
    sigma0_rel: float = 0.05          # sigma0 = sigma0_rel * ||w0||_inf
    lambda_ridge: float = 1e-3
    af_budget: int = 50_000
    adapt_every: int = 10
    v_target: float = 15.0
    demo_stride: int = 1
    policy_length_scale: float | None = None
    car: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.kernels < 1:
            raise ConfigError("kernels must be >= 1")
        if self.laps < 1:
            raise ConfigError("laps must be >= 1")
        if self.warm_starts > self.laps:
            raise ConfigError("warm_starts must be <= laps")
        if self.seeds:
            if len(self.seeds) != self.repeats:
                raise ConfigError(
                    f"repeats={self.repeats} but {len(self.seeds)} seeds given"
                )
        else:
            object.__setattr__(self, "seeds", tuple(range(1, self.repeats + 1)))
        if self.af_budget < 1:
            raise ConfigError("af_budget must be >= 1")

    def to_mapping(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d


_INT_KEYS = {"kernels", "laps", "warm_starts", "repeats", "af_budget",
             "adapt_every", "demo_stride"}
_FLOAT_KEYS = {"beta", "sigma0", "sigma0_rel", "lambda_ridge", "v_target",
               "policy_length_scale"}


def _coerce(key: str, value: str):
    value = value.strip()
    if key == "seeds":
        return tuple(int(v) for v in value.replace(",", " ").split())
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        if value.lower() in ("auto", "none"):
            return None
        return float(value)
    return value


def parse_config_text(text: str) -> dict:
    """Flat "key = value" lines; '#' starts a comment; car.* keys override
    individual car parameters."""
    out: dict = {}
    car: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("car."):
            car[key[4:]] = float(value)
        else:
            out[key] = _coerce(key, value)
    if car:
        out["car"] = car
    return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    mapping = parse_config_text(Path(path).read_text()) if path else {}
    if overrides:
        car = {**mapping.get("car", {}), **overrides.pop("car", {})}
        mapping.update({k: v for k, v in overrides.items() if v is not None})
        if car:
            mapping["car"] = car
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**mapping)


@dataclass(frozen=True)
class RunRecord:
    """One seed's trace plus its end state and runtimes."""

    method: str
    kernels: int
    seed: int
    laps: list[LapRecord]
    final_weights: np.ndarray
    final_reward: float
    runtime_seconds: float        # whole run, simulator included
    proposal_seconds: float       # acquisition-search time only
    demonstration_reward: float
    gp_hyperparams: dict | None = None  # final surrogate state, BO methods only

    @property
    def incumbent_curve(self) -> np.ndarray:
        return np.array([rec.incumbent_reward for rec in self.laps])


def resolve_track(spec: str) -> Track:
    if spec in BUILTIN_TRACKS:
        return builtin_track(spec)
    return load_track(spec)


def build_problem(config: ExperimentConfig):
    """Shared per-experiment setup: track, car, demo fit and objective.

    Returns (track, params, feature map, w0, sigma0, objective, pi reward).
    """
    track = resolve_track(config.track)
    params = CarParams(**config.car)
    demo = demo_controller(track, params, config.v_target,
                           sample_stride=config.demo_stride)
    fm = FeatureMap.regular(config.kernels, length_scale=config.policy_length_scale)
    w0 = fit_initial_weights(fm, demo, ridge=config.lambda_ridge)
    sigma0 = config.sigma0 if config.sigma0 is not None \
        else config.sigma0_rel * float(np.max(np.abs(w0)))
    pi_reward = pi_reference_result(track, params, config.v_target).reward

    def objective(w):
        return simulate_lap(track, params, Policy(fm, w)).reward

    return track, params, fm, w0, sigma0, objective, pi_reward


def _dispatch(config: ExperimentConfig, fm, w0, sigma0, objective, rng):
    spec = AcquisitionSpec(kind="ucb", beta=config.beta)
    common = dict(af_budget=config.af_budget, adapt_every=config.adapt_every)
    if config.method == "cdbo":
        return cdbo_run(objective, fm, w0, sigma0, config.warm_starts,
                        config.laps, spec, rng, **common)
    if config.method == "bo-cmaes":
        return plain_bo_run(objective, w0, sigma0, config.warm_starts,
                            config.laps, spec, rng, **common)
    if config.method in ("rembo-5d", "rembo-10d"):
        d = 5 if config.method == "rembo-5d" else 10
        return rembo_run(objective, w0, min(d, w0.size), config.warm_starts,
                         config.laps, rng, w_halfwidth=10.0 * sigma0, **common)
    if config.method == "cmaes":
        return cmaes_run(objective, w0, max(sigma0, 1e-8), config.laps, rng)
    if config.method == "random":
        return random_search_run(objective, w0, sigma0, config.laps, rng)
    raise ConfigError(f"unknown method {config.method!r}")


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Run the configured method once per seed; trace rows count = laps."""
    track, params, fm, w0, sigma0, objective, pi_reward = build_problem(config)
    records = []
    for seed in config.seeds:
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        result = _dispatch(config, fm, w0, sigma0, objective, rng)
        runtime = time.perf_counter() - t0
        gp_state = None
        if result.model is not None:
            gp_state = {
                "signal_variance": float(result.model.kernel.signal_variance),
                "length_scales": [float(v) for v in result.model.kernel.length_scales],
                "noise_variance": float(result.model.noise_variance),
                "observations": result.model.num_observations,
            }
        records.append(RunRecord(
            method=config.method,
            kernels=config.kernels,
            seed=seed,
            laps=result.laps,
            final_weights=result.incumbent.weights,
            final_reward=result.incumbent.reward,
            runtime_seconds=runtime,
            proposal_seconds=sum(r.wall_ms for r in result.laps) / 1e3,
            demonstration_reward=pi_reward,
            gp_hyperparams=gp_state,
        ))
    return records


@dataclass(frozen=True)
class AveragedCurve:
    """Per-lap mean of the incumbent reward across seeds, with envelope."""

    laps: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def aggregate_columns(columns: list[np.ndarray]) -> AveragedCurve:
    lens = {len(c) for c in columns}
    if len(lens) != 1:
        raise ValueError(f"records have mismatched lengths: {sorted(lens)}")
    stack = np.vstack(columns)
    return AveragedCurve(
        laps=np.arange(1, stack.shape[1] + 1),
        mean=stack.mean(axis=0),
        lo=stack.min(axis=0),
        hi=stack.max(axis=0),
    )


def aggregate(records: list[RunRecord]) -> AveragedCurve:
    if not records:
        raise ValueError("no records to aggregate")
    return aggregate_columns([r.incumbent_curve for r in records])


def _fmt(x) -> str:
    return repr(float(x))


def write_run_csv(record: RunRecord, path: Path) -> None:
    lines = ["lap,reward,incumbent_reward,af_evals"]
    for rec in record.laps:
        lines.append(f"{rec.lap},{_fmt(rec.reward)},{_fmt(rec.incumbent_reward)},{rec.af_evals}")
    path.write_text("\n".join(lines) + "\n")


def write_timing_csv(record: RunRecord, path: Path) -> None:
    lines = ["lap,wall_ms"]
    for rec in record.laps:
        lines.append(f"{rec.lap},{_fmt(rec.wall_ms)}")
    path.write_text("\n".join(lines) + "\n")


def read_run_csv(path) -> dict[str, np.ndarray]:
    rows = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return {
        "lap": rows[:, 0].astype(int),
        "reward": rows[:, 1],
        "incumbent_reward": rows[:, 2],
        "af_evals": rows[:, 3].astype(int),
    }


def write_curve_csv(curve: AveragedCurve, path: Path) -> None:
    lines = ["lap,mean,min,max"]
    for lap, mean, lo, hi in zip(curve.laps, curve.mean, curve.lo, curve.hi):
        lines.append(f"{lap},{_fmt(mean)},{_fmt(lo)},{_fmt(hi)}")
    path.write_text("\n".join(lines) + "\n")


def _group_key(record: RunRecord) -> tuple[str, int]:
    return method_label(record.method), record.kernels


def emit_outputs(curves: dict[tuple[str, int], AveragedCurve],
                 records: list[RunRecord], dest,
                 config: ExperimentConfig | None = None) -> list[Path]:
    """Write curve CSVs, per-seed run/timing CSVs, the runtime summary table
    and a machine-readable manifest. Returns the files written."""
    if not records:
        raise ValueError("no records to write")
    dest = Path(dest)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {dest}: {exc}") from exc

    written: list[Path] = []

    def emit(path: Path, writer) -> None:
        try:
            writer(path)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        written.append(path)

    manifest_runs = []
    for record in records:
        label, m = _group_key(record)
        stem = f"{label}_M{m}_seed{record.seed}"
        emit(dest / f"run_{stem}.csv", lambda p, r=record: write_run_csv(r, p))
        emit(dest / f"timing_{stem}.csv", lambda p, r=record: write_timing_csv(r, p))
        manifest_runs.append({
            "method": label,
            "kernels": m,
            "seed": record.seed,
            "run_csv": f"run_{stem}.csv",
            "timing_csv": f"timing_{stem}.csv",
            "final_reward": float(record.final_reward),
            "final_weights": [float(w) for w in record.final_weights],
            "runtime_seconds": float(record.runtime_seconds),
            "proposal_seconds": float(record.proposal_seconds),
            "demonstration_reward": float(record.demonstration_reward),
            "gp_hyperparams": record.gp_hyperparams,
        })

    for (label, m), curve in curves.items():
        emit(dest / f"curve_{label}_M{m}.csv", lambda p, c=curve: write_curve_csv(c, p))

    groups: dict[tuple[str, int], list[RunRecord]] = {}
    for record in records:
        groups.setdefault(_group_key(record), []).append(record)
    table = ["method,kernels,mean_proposal_seconds,mean_total_seconds"]
    for (label, m), recs in sorted(groups.items()):
        mean_prop = sum(r.proposal_seconds for r in recs) / len(recs)
        mean_total = sum(r.runtime_seconds for r in recs) / len(recs)
        table.append(f"{label},{m},{_fmt(mean_prop)},{_fmt(mean_total)}")
    emit(dest / "runtime_table.csv", lambda p: p.write_text("\n".join(table) + "\n"))

    manifest = {
        "package_version": __version__,
        "config": config.to_mapping() if config is not None else None,
        "runs": manifest_runs,
    }
    emit(dest / "manifest.json",
         lambda p: p.write_text(json.dumps(manifest, indent=2) + "\n"))
    return written


_RUN_CSV_RE = re.compile(r"run_(.+)_M(\d+)_seed(-?\d+)\.csv$")


def aggregate_directory(records_dir, dest=None) -> list[Path]:
    """Rebuild curve CSVs (and the runtime table, when a manifest is present)
    from the per-seed run CSVs in a results directory."""
    records_dir = Path(records_dir)
    dest = records_dir if dest is None else Path(dest)
    groups: dict[tuple[str, int], list[np.ndarray]] = {}
    for path in sorted(records_dir.glob("run_*.csv")):
        match = _RUN_CSV_RE.search(path.name)
        if not match:
            continue
        key = (match.group(1), int(match.group(2)))
        groups.setdefault(key, []).append(read_run_csv(path)["incumbent_reward"])
    if not groups:
        raise ValueError(f"no run_*.csv records found in {records_dir}")
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for (label, m), columns in sorted(groups.items()):
        curve = aggregate_columns(columns)
        path = dest / f"curve_{label}_M{m}.csv"
        write_curve_csv(curve, path)
        written.append(path)

    manifest_path = records_dir / "manifest.json"
    if manifest_path.exists():
        runs = json.loads(manifest_path.read_text())["runs"]
        groups2: dict[tuple[str, int], list[dict]] = {}
        for entry in runs:
            groups2.setdefault((entry["method"], entry["kernels"]), []).append(entry)
        table = ["method,kernels,mean_proposal_seconds,mean_total_seconds"]
        for (label, m), entries in sorted(groups2.items()):
            mean_prop = sum(e["proposal_seconds"] for e in entries) / len(entries)
            mean_total = sum(e["runtime_seconds"] for e in entries) / len(entries)
            table.append(f"{label},{m},{_fmt(mean_prop)},{_fmt(mean_total)}")
        path = dest / "runtime_table.csv"
        path.write_text("\n".join(table) + "\n")
        written.append(path)
    return written


def run_and_emit(config: ExperimentConfig, dest) -> list[Path]:
    """run_experiment + aggregate + emit_outputs in one call."""
    records = run_experiment(config)
    curves = {_group_key(records[0]): aggregate(records)}
    return emit_outputs(curves, records, dest, config=config)
