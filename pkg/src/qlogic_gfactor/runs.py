"""Subcommand runners, result emission and parameter sweeps."""

from __future__ import annotations

import json
import logging
import math
import re
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Literal, TypeVar

import numpy as np

from .classical import detect_spin_flip, double_trap_cycle
from .config import (
    RunConfig,
    axial_noise_model,
    build_zone,
    campaign_config,
    cooling_model,
    double_trap_timings,
    double_well,
    noise_channels,
    readout_sequence,
    resolve_species,
    sideband_drives,
    with_override,
)
from .errors import UsageError
from .models import ModeFrequencies, SpinFlipDetection
from .protocol import (
    assignment_fidelity,
    compare_cpt,
    readout_response,
    run_campaign,
    run_readout,
)
from .qdyn import (
    SpinMotionState,
    SpinReset,
    exchange_propagator,
    ground_state_cool,
    simulate_readout_chain,
    swap_time,
    thermal_state,
)
from .storage import Cell, dump_json, format_cell, write_csv
from .streams import derive_seed, substream
from .trap import perturbed_modes

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]
T = TypeVar("T")
R = TypeVar("R")

ONE_HOUR = 3600.0


@dataclass
class Table:
    name: str
    header: tuple[str, ...]
    rows: list[tuple[Cell, ...]] = field(default_factory=list)


@dataclass
class RunResult:
    command: str
    tables: list[Table] = field(default_factory=list)
    summary: dict[str, Any] | None = None
    messages: list[str] = field(default_factory=list)


Runner = Callable[[RunConfig, int, int], RunResult]


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Map in a thread pool; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def emit(result: RunResult, out_dir: str | Path, fmt: OutputFormat, suffix: str = "") -> list[Path]:
    """Write tables (CSV, or embedded in JSON) and the JSON summary."""
    out = Path(out_dir)
    written: list[Path] = []
    if fmt == "csv":
        for table in result.tables:
            path = out / f"{table.name}{suffix}.csv"
            write_csv(path, table.header, table.rows)
            written.append(path)
        if result.summary is not None:
            path = out / f"{result.command}{suffix}.json"
            dump_json(path, result.summary)
            written.append(path)
        return written
    payload: dict[str, Any] = {"command": result.command, "summary": result.summary}
    payload["tables"] = {
        table.name: [dict(zip(table.header, row)) for row in table.rows] for table in result.tables
    }
    path = out / f"{result.command}{suffix}.json"
    dump_json(path, payload)
    return [path]


def run_modes(cfg: RunConfig, seed: int = 0, workers: int = 1) -> RunResult:
    species = resolve_species(cfg, cfg.campaign.species)
    zone = build_zone(cfg, cfg.campaign.zone)
    modes = perturbed_modes(species, zone)
    table = Table(
        "modes",
        ("omega_plus", "omega_minus", "omega_z", "omega_c", "invariance_residual", "stable"),
        [
            (
                modes.omega_plus,
                modes.omega_minus,
                modes.omega_z,
                modes.omega_c_free,
                modes.invariance_residual(),
                modes.stable,
            )
        ],
    )
    two_pi = 2.0 * math.pi
    message = (
        f"{species.name} in {zone.name}: nu_+ = {modes.omega_plus / two_pi:.6f} Hz, "
        f"nu_z = {modes.omega_z / two_pi:.6f} Hz, nu_- = {modes.omega_minus / two_pi:.6f} Hz"
    )
    return RunResult("modes", [table], None, [message])


def run_invariance_check(
    cfg: RunConfig,
    seed: int,
    workers: int = 1,
    *,
    count: int = 1000,
    max_tilt: float = 0.05,
    max_ellipticity: float = 0.2,
) -> RunResult:
    """Invariance theorem on randomly tilted and elliptic copies of the campaign zone."""
    species = resolve_species(cfg, cfg.campaign.species)
    base = build_zone(cfg, cfg.campaign.zone)

    def trial(index: int) -> tuple[float, float, ModeFrequencies]:
        rng = substream(seed, "invariance", index)
        tilt = float(rng.uniform(-max_tilt, max_tilt))
        ellipticity = float(rng.uniform(-max_ellipticity, max_ellipticity))
        zone = replace(base, tilt_theta=tilt, ellipticity=ellipticity)
        return tilt, ellipticity, perturbed_modes(species, zone)

    trials = parallel_map(trial, list(range(count)), workers)
    worst = max(abs(modes.invariance_residual()) for _, _, modes in trials)
    rows: list[tuple[Cell, ...]] = [
        (
            index,
            tilt,
            ellipticity,
            modes.omega_plus,
            modes.omega_minus,
            modes.omega_z,
            modes.invariance_residual(),
        )
        for index, (tilt, ellipticity, modes) in enumerate(trials)
    ]
    table = Table(
        "invariance",
        (
            "trial",
            "tilt_theta",
            "ellipticity",
            "omega_plus",
            "omega_minus",
            "omega_z",
            "invariance_residual",
        ),
        rows,
    )
    summary = {"count": count, "max_abs_residual": worst, "passed": worst <= 1e-9}
    return RunResult("invariance-check", [table], summary)


def run_exchange(cfg: RunConfig, seed: int = 0, workers: int = 1) -> RunResult:
    dw = double_well(cfg)
    rate = dw.exchange_rate
    n_max = cfg.exchange.n_max
    initial = SpinMotionState.fock(False, [1, 0], n_max)
    horizon = 2.0 * swap_time(dw)
    table = Table("exchange", ("time_s", "basis_label", "population"))
    for step in range(cfg.exchange.samples + 1):
        t = horizon * step / cfg.exchange.samples
        unitary = exchange_propagator(rate, dw.detuning, n_max, t)
        blocks = initial.amplitudes.reshape(2, -1) @ unitary.T
        populations = np.abs(blocks.reshape(-1)) ** 2
        for index, population in enumerate(populations):
            if population > 1e-12:
                table.rows.append((t, initial.label(index), float(population)))
    summary = {
        "species_a": dw.species_a.name,
        "species_b": dw.species_b.name,
        "separation_m": dw.separation,
        "exchange_rate_rad_s": rate,
        "swap_time_s": swap_time(dw),
        "detuning_rad_s": dw.detuning,
    }
    return RunResult("exchange", [table], summary)


def run_readout_sim(
    cfg: RunConfig, seed: int, workers: int = 1, *, shots: int = 10_000
) -> RunResult:
    seq = readout_sequence(cfg)
    particle_drive, ion_drive = sideband_drives(cfg)
    dw = double_well(cfg)
    q = cfg.qdyn

    def chain(spin_up: bool) -> tuple[float, list[tuple[Cell, ...]]]:
        result = simulate_readout_chain(
            spin_up,
            particle_drive,
            ion_drive,
            dw,
            substream(seed, "readout/chain", int(spin_up)),
            n_max=q.readout_n_max,
            noise=noise_channels(cfg),
            trajectories=q.trajectories,
            samples_per_step=q.samples_per_step,
            guard=q.truncation_guard,
        )
        rows: list[tuple[Cell, ...]] = [
            (s.time, f"{s.stage}:{s.label}", s.population) for s in result.samples
        ]
        return result.bright_probability, rows

    (bright_down, _), (bright_up, history) = parallel_map(chain, [False, True], workers)

    def monte_carlo(spin_up: bool) -> float:
        rng = substream(seed, "readout/shots", int(spin_up))
        bright = sum(run_readout(spin_up, seq, rng).bright for _ in range(shots))
        return bright / shots

    mc_down, mc_up = parallel_map(monte_carlo, [False, True], workers)
    enum_up, enum_down = readout_response(seq)
    summary = {
        "total_duration_s": seq.total_duration,
        "under_one_second": seq.total_duration < 1.0,
        "p_bright_given_up": enum_up,
        "p_bright_given_down": enum_down,
        "assignment_fidelity": assignment_fidelity(seq),
        "monte_carlo_shots": shots,
        "monte_carlo_bright_given_up": mc_up,
        "monte_carlo_bright_given_down": mc_down,
        "chain_bright_probability_up": bright_up,
        "chain_bright_probability_down": bright_down,
        "exchange_rate_rad_s": dw.exchange_rate,
    }
    table = Table("readout_populations", ("time_s", "basis_label", "population"), history)
    return RunResult("readout-sim", [table], summary)


def run_classical_baseline(cfg: RunConfig, seed: int, workers: int = 1) -> RunResult:
    species = resolve_species(cfg, cfg.classical.species)
    zone = build_zone(cfg, cfg.classical.zone)
    cm, nm = cooling_model(cfg), axial_noise_model(cfg)
    timings = double_trap_timings(cfg)
    repetitions = timings.analysis_zone_detection_repetitions
    modes = perturbed_modes(species, zone)

    def trial(index: int) -> SpinFlipDetection:
        return detect_spin_flip(
            species,
            zone,
            nm,
            cm,
            repetitions,
            substream(seed, "classical/trial", index),
            flip_occurred=index % 2 == 0,
            modes=modes,
        )

    detections = parallel_map(trial, list(range(cfg.classical.trials)), workers)
    table = Table(
        "classical_trials",
        (
            "trial",
            "flip_occurred",
            "decision",
            "decision_correct",
            "error_prob",
            "wall_time_s",
            "repetitions",
            "n_plus_mean",
            "spin_shift_rad_s",
        ),
        [
            (
                i,
                d.flip_occurred,
                d.decision,
                d.decision_correct,
                d.error_prob,
                d.wall_time,
                d.repetitions,
                d.n_plus_mean,
                d.spin_shift,
            )
            for i, d in enumerate(detections)
        ],
    )
    first = detections[0]
    cycle = double_trap_cycle(timings, first)
    assumptions = [
        f"tau_resistive={cm.tau_resistive:g} s, T={cm.T_equilibrium:g} K",
        f"sigma0={nm.sigma0:g} rad/s per axial sample, detection_time={nm.detection_time:g} s",
        f"cooling wait 3*tau between repetitions, {repetitions} repetitions",
    ]
    for note in assumptions:
        logger.info("classical assumption: %s", note)
    summary = {
        "species": species.name,
        "zone": zone.name,
        "repetitions": repetitions,
        "spin_shift_rad_s": first.spin_shift,
        "error_prob": first.error_prob,
        "empirical_error_rate": sum(not d.decision_correct for d in detections)
        / len(detections),
        "detection_wall_time_s": first.wall_time,
        "cycle_time_s": cycle,
        "exceeds_one_hour": first.wall_time > ONE_HOUR,
        "assumptions": assumptions,
    }
    return RunResult("classical-baseline", [table], summary)


def run_campaign_cmd(cfg: RunConfig, seed: int, workers: int = 1) -> RunResult:
    campaign = campaign_config(cfg)
    seeds = [derive_seed(seed, "campaign/replica", i) for i in range(cfg.campaign.replicas)]
    reports = parallel_map(lambda s: run_campaign(campaign, s), seeds, workers)
    first = reports[0]
    tables = [
        Table(
            "campaign_shots",
            ("timestamp_s", "kind", "detuning_rad_s", "outcome"),
            [(s.timestamp_s, s.kind, s.detuning_rad_s, s.outcome) for s in first.shots],
        ),
        Table(
            "campaign_cycles",
            (
                "index",
                "omega_l",
                "omega_l_sigma",
                "omega_c",
                "omega_c_sigma",
                "g",
                "g_sigma",
                "wall_time_s",
            ),
            [
                (
                    c.index,
                    c.omega_l,
                    c.omega_l_sigma,
                    c.omega_c,
                    c.omega_c_sigma,
                    c.g,
                    c.g_sigma,
                    c.wall_time,
                )
                for c in first.cycles
            ],
        ),
    ]
    summary = first.to_dict()
    summary.pop("cycles")
    if len(reports) > 1:
        pulls = [(r.g_estimate - r.g_true) / r.g_sigma for r in reports]
        tables.append(
            Table(
                "campaign_replicas",
                ("replica", "seed", "g_estimate", "g_sigma", "pull"),
                [
                    (i, r.seed, r.g_estimate, r.g_sigma, pull)
                    for i, (r, pull) in enumerate(zip(reports, pulls))
                ],
            )
        )
        summary["replicas"] = len(reports)
        summary["within_3_sigma"] = sum(abs(p) < 3.0 for p in pulls) / len(pulls)
    return RunResult("campaign", tables, summary)


def run_ground_cool(cfg: RunConfig, seed: int = 0, workers: int = 1) -> RunResult:
    q = cfg.qdyn
    particle_drive, _ = sideband_drives(cfg)
    initial = thermal_state(q.initial_n_bar, q.n_max, guard=q.truncation_guard)
    outcome = ground_state_cool(
        initial,
        particle_drive,
        SpinReset(failure_probability=q.reset_failure),
        target=q.cooling_target,
        max_pulses=q.max_pulses,
        guard=q.truncation_guard,
    )
    table = Table(
        "ground_cool", ("pulse", "n_bar"), [(i, n) for i, n in enumerate(outcome.history)]
    )
    summary = outcome.to_dict()
    summary.pop("history")
    summary["initial_n_bar"] = q.initial_n_bar
    return RunResult("ground-cool", [table], summary)


def run_cpt_compare(cfg: RunConfig, seed: int, workers: int = 1) -> RunResult:
    comparison = compare_cpt(campaign_config(cfg), seed)
    return RunResult("cpt-compare", [], comparison.to_dict())


RUNNERS: dict[str, Runner] = {
    "modes": run_modes,
    "invariance-check": run_invariance_check,
    "exchange": run_exchange,
    "readout-sim": run_readout_sim,
    "classical-baseline": run_classical_baseline,
    "campaign": run_campaign_cmd,
    "ground-cool": run_ground_cool,
    "cpt-compare": run_cpt_compare,
}


def parse_value(raw: str) -> Any:
    """JSON scalar if it parses as one, else the raw string."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        return raw
    if isinstance(value, dict | list):
        raise UsageError(f"sweep value {raw!r} is not a scalar")
    return value


def _slug(value: Any) -> str:
    text = format_cell(value) if isinstance(value, float | int | bool) else str(value)
    return re.sub(r"[^A-Za-z0-9.+-]", "_", text)


@dataclass(frozen=True)
class SweepRun:
    index: int
    value: Any
    seed: int
    result: RunResult
    files: tuple[str, ...]


def sweep(
    cfg: RunConfig,
    command: str,
    parameter_path: str,
    values: Iterable[Any],
    *,
    out_dir: str | Path,
    fmt: OutputFormat = "csv",
    workers: int = 1,
) -> list[SweepRun]:
    """One run per value with seeds derived from (master_seed, index)."""
    values = list(values)
    if not values:
        raise UsageError("sweep needs at least one value")
    runner = RUNNERS.get(command)
    if runner is None:
        raise UsageError(f"cannot sweep unknown command {command!r}")
    configs = [with_override(cfg, parameter_path, value) for value in values]

    def one(index: int) -> SweepRun:
        seed = derive_seed(cfg.master_seed, "sweep", index)
        result = runner(configs[index], seed, 1)
        suffix = f"_{index:03d}_{_slug(values[index])}"
        files = emit(result, out_dir, fmt, suffix)
        return SweepRun(index, values[index], seed, result, tuple(str(f) for f in files))

    runs = parallel_map(one, list(range(len(values))), workers)
    index = {
        "command": command,
        "parameter": parameter_path,
        "master_seed": cfg.master_seed,
        "runs": [
            {
                "index": run.index,
                "value": run.value,
                "seed": run.seed,
                "files": [Path(f).name for f in run.files],
                "summary": run.result.summary,
            }
            for run in runs
        ],
    }
    dump_json(Path(out_dir) / "sweep_index.json", index)
    return runs
