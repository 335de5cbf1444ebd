"""Pipeline orchestration: config, caching, sweeps, and report files.

A run sweeps (distance, gamma, schedule) cells.  Each cell extracts (or
loads from cache) the twirled plaquette channel, samples both memory bases
with identical fault draws, decodes each basis' matching graph, and counts
a shot as a logical failure when either decoder mispredicts its observable.
Sampling stops when the Wilson interval half-width drops below the target
fraction of the estimate or the shot cap is reached; points below the deep
gamma threshold get a larger cap because their failure rates sit well below
1e-4 at desk scale.
"""

from __future__ import annotations

import csv
import hashlib
import json
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .analysis import (census, fit_nu, write_census_csv, write_nu_csv,
                       REFERENCE_GAMMA)
from .code import build_circuit, build_layout, enumerate_faults
from .decoder import build_graph
from .dynamics import IonizationSchedule, NoiseParams
from .errors import ValidationError
from .pulse import (GateModel, PulseProfile, default_pulse, read_pulse,
                    synthesize_pulse, write_pulse)
from .sampler import ChannelSampler, failure_vector, wilson_interval
from .twirl import PauliChannel, extract_pauli_channel

RNG_CHUNK = 262144  # shots added per adaptive step (multiple of the RNG block)

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "pulse": {
            "type": "object",
            "properties": {
                "file": {"type": "string"},
                "segments": {"type": "integer", "minimum": 8},
                "tol": {"type": "number", "minimum": 1e-10},
            },
            "additionalProperties": False,
        },
        "channel_gammas": {"type": "array", "items": {"type": "number",
                                                      "exclusiveMinimum": 0}},
        "mc_gammas": {"type": "array", "items": {"type": "number",
                                                 "exclusiveMinimum": 0}},
        "distances": {"type": "array", "items": {"type": "integer"}},
        "shots_cap": {"type": "integer", "minimum": 1},
        "deep_shots_cap": {"type": "integer", "minimum": 1},
        "deep_gamma_threshold": {"type": "number", "minimum": 0},
        "target_rel_ci": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "outdir": {"type": "string"},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "p_floor": {"type": "number", "minimum": 0},
        "decoder_cap": {"type": "integer", "minimum": 2},
        "workers": {"type": "integer", "minimum": 1},
        "crossing_cap": {"type": "number", "exclusiveMinimum": 0},
        "group_order": {"enum": ["z_first", "x_first", "interleaved"]},
    },
    "required": ["outdir"],
    "additionalProperties": False,
}


def _default_channel_gammas() -> list:
    return [float(g) for g in np.logspace(-5, -3, 8)]


def _default_mc_gammas() -> list:
    return [float(g) for g in np.logspace(-4, -2, 8)]


def exponent_gammas(lo: float = 3e-5, hi: float = 3e-4,
                    per_decade: int = 12) -> list:
    """Dense low-gamma grid for exponent fits.

    The hook-dominated regime where the single-decay (nu ~ 1) term beats the
    two-fault background sits below gamma ~ 1e-4 at d = 3, so exponent runs
    need points there, with a deep shot cap to resolve p_L ~ 1e-5."""
    n = int(np.ceil((np.log10(hi) - np.log10(lo)) * per_decade)) + 1
    return [float(g) for g in np.logspace(np.log10(lo), np.log10(hi), n)]


@dataclass
class ExperimentConfig:
    outdir: str
    pulse: dict = field(default_factory=dict)
    channel_gammas: list = field(default_factory=_default_channel_gammas)
    mc_gammas: list = field(default_factory=_default_mc_gammas)
    distances: list = field(default_factory=lambda: [3, 5])
    shots_cap: int = 1_000_000
    deep_shots_cap: int = 1_000_000
    deep_gamma_threshold: float = 1e-4
    target_rel_ci: float = 0.1
    seed: int = 2024
    dt: float = 1e-3
    p_floor: float = 1e-12
    decoder_cap: int = 16
    workers: int = 1
    crossing_cap: float = 0.1
    group_order: str = "z_first"

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw),
                        key=lambda e: e.json_path)
        if errors:
            msgs = "; ".join(f"{e.json_path}: {e.message}" for e in errors)
            raise ValidationError(f"config {path}: {msgs}")
        return cls(**raw)

    def resolved_copy_into(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "config.resolved.json", "w") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")


def cell_seed(master: int, *parts) -> int:
    """Stable 63-bit per-cell seed from the master seed and cell labels."""
    h = hashlib.sha256(("|".join([str(master)] + [repr(p) for p in parts]))
                       .encode()).digest()
    return int.from_bytes(h[:8], "big") >> 1


# ---------------------------------------------------------------------------
# Pulse and channel caching

def load_profile(config: ExperimentConfig) -> PulseProfile:
    spec = config.pulse
    if "file" in spec:
        return read_pulse(spec["file"])
    if "segments" in spec:
        outdir = Path(config.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        cache = outdir / f"pulse_n{spec['segments']}_tol{spec['tol']!r}.csv"
        if cache.exists():
            return read_pulse(cache)
        profile = synthesize_pulse(GateModel(), spec["segments"], spec["tol"])
        write_pulse(profile, cache)
        return profile
    return default_pulse()


def channel_cache_key(pulse_id: str, gamma: float, dt: float,
                      schedule: IonizationSchedule) -> str:
    payload = json.dumps({"pulse": pulse_id, "gamma": repr(gamma),
                          "dt": repr(dt), "kind": schedule.kind,
                          "p_depl": repr(schedule.p_depl), "v": 1},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def get_channel(profile: PulseProfile, gamma: float, dt: float,
                schedule: IonizationSchedule,
                cache_dir: Path | None = None) -> PauliChannel:
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        key = channel_cache_key(profile.pulse_id(), gamma, dt, schedule)
        path = cache_dir / f"channel_{key}.json"
        if path.exists():
            return PauliChannel.load(path)
    ch = extract_pauli_channel(profile, NoiseParams(gamma=gamma, dt=dt), schedule)
    if cache_dir is not None:
        ch.save(path)
    return ch


# ---------------------------------------------------------------------------
# Monte Carlo cells

@dataclass(frozen=True)
class CellResult:
    d: int
    gamma: float
    schedule: IonizationSchedule
    n_shots: int
    n_failures: int
    p_l: float
    ci: tuple
    seed: int
    fallback_shots: int

    def csv_row(self) -> list:
        return [self.d, repr(self.gamma), self.schedule.kind,
                repr(self.schedule.p_depl), self.n_shots, repr(self.p_l),
                repr(self.ci[0]), repr(self.ci[1]), self.seed]


def mc_point(profile: PulseProfile, d: int, gamma: float,
             schedule: IonizationSchedule, config: ExperimentConfig,
             cache_dir: Path | None = None) -> CellResult:
    """One (d, gamma, schedule) cell: adaptive both-basis sampling."""
    channel = get_channel(profile, gamma, config.dt, schedule, cache_dir)
    layout = build_layout(d)
    channels = {"X": channel, "Z": channel}
    seed = cell_seed(config.seed, d, schedule.label(), gamma)
    sides = []
    for basis in ("z", "x"):
        ir = build_circuit(layout, memory_basis=basis,
                           group_order=config.group_order)
        dem = enumerate_faults(ir, layout, channels, p_floor=config.p_floor)
        graph = build_graph(dem, "Z" if basis == "z" else "X",
                            cap=config.decoder_cap)
        sampler = ChannelSampler(ir, layout, channels, seed)
        sides.append((sampler, graph, {}))

    deep = gamma < config.deep_gamma_threshold
    cap = config.deep_shots_cap if deep else config.shots_cap
    n = 0
    failures = 0
    fallback = 0
    while n < cap:
        hi = min(n + RNG_CHUNK, cap)
        fail_any = None
        for sampler, graph, cache in sides:
            batch = sampler.sample_range(n, hi)
            fails, fb = failure_vector(batch, graph, decode_cache=cache)
            fallback += int(fb.sum())
            fail_any = fails if fail_any is None else (fail_any | fails)
        failures += int(fail_any.sum())
        n = hi
        if failures >= 10:
            lo, hi_ci = wilson_interval(failures, n)
            p = failures / n
            if (hi_ci - lo) / 2.0 <= config.target_rel_ci * p:
                break
        if deep and cap > config.shots_cap and n >= 4_000_000:
            # a point that cannot reach ~100 failures by the cap will be
            # excluded from fit windows anyway; stop burning shots on it
            if failures * (cap / n) < 85.0:
                break
    ci = wilson_interval(failures, n)
    return CellResult(d=d, gamma=gamma, schedule=schedule, n_shots=n,
                      n_failures=failures, p_l=failures / n, ci=ci, seed=seed,
                      fallback_shots=fallback)


def _mc_cell_task(args) -> CellResult:
    profile_segments, theta, d, gamma, kind, p_depl, config_dict, cache_dir = args
    profile = PulseProfile(segments=profile_segments,
                           total_time=sum(s[0] for s in profile_segments),
                           theta=theta)
    config = ExperimentConfig(**config_dict)
    schedule = IonizationSchedule(kind, p_depl)
    return mc_point(profile, d, gamma, schedule, config,
                    cache_dir=Path(cache_dir) if cache_dir else None)


def run_cells(profile: PulseProfile, cells: list, config: ExperimentConfig,
              cache_dir: Path | None) -> list:
    """Evaluate (d, gamma, schedule) cells, optionally in parallel; the
    result order and content do not depend on the worker count."""
    tasks = [(profile.segments, profile.theta, d, gamma, sched.kind,
              sched.p_depl, asdict(config), str(cache_dir) if cache_dir else "")
             for (d, gamma, sched) in cells]
    if config.workers <= 1:
        results = [_mc_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_mc_cell_task, tasks))
    return results


# ---------------------------------------------------------------------------
# Figure-level runs

FIG1C_SCHEDULES = [IonizationSchedule("after_every_gate_both", p)
                   for p in (1.0, 0.9, 0.75, 0.5, 0.0)]
FIGS3_SCHEDULES = [
    IonizationSchedule("after_every_gate_both", 1.0),
    IonizationSchedule("ancilla_only_every_gate"),
    IonizationSchedule("ancilla_twice"),
    IonizationSchedule("ancilla_halfway"),
    IonizationSchedule("data_only_every_gate"),
    IonizationSchedule("none"),
]
CENSUS_SCHEDULES = FIG1C_SCHEDULES + FIGS3_SCHEDULES[1:]


def write_results_csv(path, results: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "gamma", "schedule", "p_depl", "n_shots",
                         "p_L", "ci_lo", "ci_hi", "seed"])
        for res in results:
            writer.writerow(res.csv_row())


def fit_results(results: list, config: ExperimentConfig) -> list:
    fits = []
    by_cell = {}
    for res in results:
        by_cell.setdefault((res.d, res.schedule.label()), {})[res.gamma] = \
            (res.p_l, res.ci)
    for (d, label), points in sorted(by_cell.items()):
        try:
            fits.append(fit_nu(points, d, label,
                               crossing_cap=config.crossing_cap))
        except ValidationError:
            continue
    return fits


def _run_mc_figure(config: ExperimentConfig, schedules: list, name: str) -> dict:
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config.resolved_copy_into(outdir)
    cache_dir = outdir / "cache"
    profile = load_profile(config)
    cells = [(d, gamma, sched)
             for d in config.distances
             for sched in schedules
             for gamma in sorted(config.mc_gammas)]
    results = run_cells(profile, cells, config, cache_dir)
    results_path = outdir / f"{name}_results.csv"
    write_results_csv(results_path, results)
    fits = fit_results(results, config)
    nu_path = outdir / f"{name}_nu.csv"
    write_nu_csv(nu_path, fits)
    return {"results": results, "fits": fits,
            "files": [results_path, nu_path]}


def run_figure1c(config: ExperimentConfig) -> dict:
    return _run_mc_figure(config, FIG1C_SCHEDULES, "fig1c")


def run_figureS3(config: ExperimentConfig) -> dict:
    return _run_mc_figure(config, FIGS3_SCHEDULES, "figS3")


def run_figure2(config: ExperimentConfig) -> dict:
    """Hook census over all schedules and both stabilizer bases."""
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config.resolved_copy_into(outdir)
    cache_dir = outdir / "cache"
    profile = load_profile(config)
    grid = sorted(config.channel_gammas)
    channels = {}
    refs = {}
    for sched in CENSUS_SCHEDULES:
        label = sched.label()
        series = {g: get_channel(profile, g, config.dt, sched, cache_dir)
                  for g in grid}
        ref = get_channel(profile, REFERENCE_GAMMA, config.dt, sched, cache_dir)
        channels[(label, "Z")] = series
        channels[(label, "X")] = {g: c.to_x_basis() for g, c in series.items()}
        refs[(label, "Z")] = ref
        refs[(label, "X")] = ref.to_x_basis()
    records = census(channels, grid, reference=refs)
    census_path = outdir / "fig2_census.csv"
    write_census_csv(census_path, records)
    counts_path = outdir / "fig2_counts.csv"
    with open(counts_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schedule", "basis", "hook_count"])
        for (label, basis) in sorted(records):
            writer.writerow([label, basis, len(records[(label, basis)])])
    return {"census": records, "files": [census_path, counts_path]}


def verify_run(config: ExperimentConfig, which: str) -> list:
    """Recompute a figure run into a scratch directory and diff the files.

    Returns the list of mismatching file names (empty = reproducible)."""
    outdir = Path(config.outdir)
    scratch = outdir / "_verify"
    if scratch.exists():
        shutil.rmtree(scratch)
    import copy

    cfg2 = copy.deepcopy(config)
    cfg2.outdir = str(scratch)
    runner = {"fig1c": run_figure1c, "fig2": run_figure2,
              "figS3": run_figureS3}[which]
    out = runner(cfg2)
    mismatches = []
    for f in out["files"]:
        original = outdir / Path(f).name
        if not original.exists():
            mismatches.append(f"{original} (missing)")
            continue
        if original.read_bytes() != Path(f).read_bytes():
            mismatches.append(str(original))
    shutil.rmtree(scratch)
    return mismatches
