"""Run configuration: strict TOML/JSON schema and builders for the physics layer."""

from __future__ import annotations

import json
import math
import os
import re
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .classical import (
    AxialNoiseModel,
    CoolingModel,
    DoubleTrapTimings,
    detection_operating_point,
    required_repetitions,
)
from .constants import CODATA2018
from .errors import ConfigError, DomainError, UsageError
from .models import Species, TrapZone
from .protocol import (
    CampaignConfig,
    ClassicalSetup,
    DriftModel,
    ReadoutSequence,
    ReadoutStep,
    ScanPlan,
)
from .qdyn import DoubleWell, NoiseChannels, SidebandDrive
from .species import BUILTIN_SPECIES
from .storage import load_json
from .trap import perturbed_modes

CONFIG_DIR_ENV = "QLGSIM_CONFIG_DIR"
DEFAULT_CONFIG_NAME = "qlgsim.toml"
_TOML_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpeciesSection(StrictModel):
    charge_e: float
    mass_kg: float = Field(gt=0)
    g_factor: float | None = None
    spin_moment: float | None = None


class ZoneSection(StrictModel):
    B0: float = Field(gt=0)
    V0: float = Field(gt=0)
    d_char: float = Field(gt=0)
    B2: float = 0.0
    c2: float = 0.5
    tilt_theta: float = 0.0
    ellipticity: float = 0.0


class CoolingSection(StrictModel):
    tau_resistive: float = Field(default=100.0, gt=0)
    T_equilibrium: float = Field(default=4.2, gt=0)


class AxialNoiseSection(StrictModel):
    sigma0: float = Field(ge=0)
    detection_time: float = Field(gt=0)


class DoubleTrapSection(StrictModel):
    transport_time: float = Field(default=10.0, ge=0)
    precision_zone_interrogation_time: float = Field(default=10.0, ge=0)
    analysis_zone_detection_repetitions: int | None = Field(default=None, ge=1)


class ClassicalSection(StrictModel):
    species: str = "proton"
    zone: str = "analysis"
    target_error: float = Field(default=0.01, gt=0, lt=1)
    trials: int = Field(default=20, ge=1)


class ExchangeSection(StrictModel):
    species_a: str = "proton"
    species_b: str = "be9"
    separation: float = Field(default=300e-6, gt=0)
    omega_a: float = Field(default=2 * math.pi * 1e6, gt=0)
    omega_b: float = Field(default=2 * math.pi * 1e6, gt=0)
    n_max: int = Field(default=4, ge=1)
    samples: int = Field(default=40, ge=2)


class QdynSection(StrictModel):
    n_max: int = Field(default=30, ge=1)
    truncation_guard: float = Field(default=1e-6, gt=0)
    lamb_dicke_limit: float = Field(default=0.5, gt=0)
    heating_rate: float = Field(default=0.0, ge=0)
    t2: float | None = Field(default=None, gt=0)
    particle_rabi: float = Field(default=4760.0, gt=0)
    particle_eta: float = Field(default=0.1, ge=0)
    ion_rabi: float = Field(default=628318.5, gt=0)
    ion_eta: float = Field(default=0.1, ge=0)
    readout_n_max: int = Field(default=6, ge=1)
    trajectories: int = Field(default=1, ge=1)
    samples_per_step: int = Field(default=20, ge=1)
    initial_n_bar: float = Field(default=1.0, ge=0)
    reset_failure: float = Field(default=0.0, ge=0, le=1)
    cooling_target: float = Field(default=0.01, gt=0)
    max_pulses: int = Field(default=500, ge=1)


class ReadoutStepSection(StrictModel):
    kind: str
    duration: float
    fidelity: float = 1.0


def _default_readout() -> list[ReadoutStepSection]:
    return [
        ReadoutStepSection(kind="larmor_probe", duration=0.02),
        ReadoutStepSection(kind="proton_red_sideband_pi", duration=6.6e-3),
        ReadoutStepSection(kind="exchange_swap", duration=5.8e-3),
        ReadoutStepSection(kind="be_red_sideband_pi", duration=5e-5),
        ReadoutStepSection(kind="fluorescence_detect", duration=3e-4),
    ]


class DriftSection(StrictModel):
    linear_rate: float = 0.0
    random_walk_amplitude: float = Field(default=0.0, ge=0)


class CampaignSection(StrictModel):
    mode: Literal["quantum_logic", "classical_baseline"] = "quantum_logic"
    species: str = "proton"
    reference: str = "be9"
    zone: str = "precision"
    g_true: float | None = None
    cycles: int = Field(default=3, ge=1)
    replicas: int = Field(default=1, ge=1)
    points: int = Field(default=11, ge=5)
    span: float = Field(default=2.0, gt=0)
    shots: int = Field(default=50, ge=1)
    probe_time: float = Field(default=0.02, gt=0)
    shot_overhead: float = Field(default=0.0, ge=0)
    reference_relative_sigma: float = Field(default=0.0, ge=0)
    cyclotron_relative_sigma: float = Field(default=0.0, ge=0)
    cooling_time: float = Field(default=5.0, ge=0)
    cyclotron_time: float = Field(default=10.0, ge=0)
    center_guess_offset: float = 0.0
    reference_every: int = Field(default=1, ge=1)
    noiseless: bool = False


class OutputSection(StrictModel):
    dir: str = "out"
    format: Literal["csv", "json"] = "csv"


class RunConfig(StrictModel):
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    species: dict[str, SpeciesSection] = Field(default_factory=dict)
    zones: dict[str, ZoneSection] = Field(default_factory=dict)
    cooling: CoolingSection = Field(default_factory=CoolingSection)
    axial_noise: AxialNoiseSection | None = None
    double_trap: DoubleTrapSection = Field(default_factory=DoubleTrapSection)
    classical: ClassicalSection = Field(default_factory=ClassicalSection)
    exchange: ExchangeSection = Field(default_factory=ExchangeSection)
    qdyn: QdynSection = Field(default_factory=QdynSection)
    readout: list[ReadoutStepSection] = Field(default_factory=_default_readout)
    drift: DriftSection = Field(default_factory=DriftSection)
    campaign: CampaignSection = Field(default_factory=CampaignSection)
    output: OutputSection = Field(default_factory=OutputSection)


def resolve_config_path(path: str | None) -> Path:
    """Locate a config file, falling back to ``$QLGSIM_CONFIG_DIR``."""
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if path is None:
        base = Path(config_dir) if config_dir else Path.cwd()
        candidate = base / DEFAULT_CONFIG_NAME
        if not candidate.exists():
            raise UsageError(f"no --config given and {candidate} does not exist")
        return candidate
    candidate = Path(path)
    if candidate.exists():
        return candidate
    if config_dir and not candidate.is_absolute() and (Path(config_dir) / candidate).exists():
        return Path(config_dir) / candidate
    raise ConfigError(f"config file not found: {path}", key=None)


def _parse_document(path: Path) -> dict[str, Any]:
    payload: object
    try:
        if path.suffix == ".json":
            payload = load_json(path)
        else:
            payload = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_POSITION.search(str(exc))
        line, column = (int(match[1]), int(match[2])) if match else (None, None)
        raise ConfigError(f"{path}: {exc}", line=line, column=column) from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return payload


def parse_config(payload: dict[str, Any]) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(payload)
    except ValidationError as exc:
        problems = []
        for error in exc.errors():
            key = ".".join(str(part) for part in error["loc"])
            reason = "unknown key" if error["type"] == "extra_forbidden" else error["msg"]
            problems.append((key, reason))
        first_key = problems[0][0] if problems else None
        message = "; ".join(f"{key}: {reason}" for key, reason in problems)
        raise ConfigError(f"invalid config: {message}", key=first_key) from exc
    check_references(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    return parse_config(_parse_document(Path(path)))


def dump_config(cfg: RunConfig) -> str:
    """Canonical JSON form; ``parse_config(json.loads(...))`` returns an equal config."""
    return json.dumps(cfg.model_dump(mode="json"), indent=2)


def _known_species(cfg: RunConfig) -> set[str]:
    return set(BUILTIN_SPECIES) | set(cfg.species)


def check_references(cfg: RunConfig) -> None:
    species = _known_species(cfg)
    references = {
        "classical.species": cfg.classical.species,
        "exchange.species_a": cfg.exchange.species_a,
        "exchange.species_b": cfg.exchange.species_b,
        "campaign.species": cfg.campaign.species,
        "campaign.reference": cfg.campaign.reference,
    }
    for key, name in references.items():
        if name not in species:
            raise ConfigError(f"{key}: undefined species {name!r}", key=key)
    zones = {"classical.zone": cfg.classical.zone, "campaign.zone": cfg.campaign.zone}
    for key, name in zones.items():
        if name not in cfg.zones:
            raise ConfigError(f"{key}: undefined zone {name!r}", key=key)
    for name, section in cfg.species.items():
        if (section.g_factor is None) == (section.spin_moment is None):
            raise ConfigError(
                f"species.{name}: give exactly one of g_factor or spin_moment",
                key=f"species.{name}",
            )
    try:
        readout_sequence(cfg)
    except DomainError as exc:
        raise ConfigError(f"readout: {exc}", key="readout") from exc
    if cfg.campaign.mode == "classical_baseline" and cfg.axial_noise is None:
        raise ConfigError("classical_baseline mode needs [axial_noise]", key="axial_noise")


def defaulted_fields(cfg: BaseModel, prefix: str = "") -> list[str]:
    """Dotted paths of every field that was not given explicitly."""
    defaulted: list[str] = []
    for name in type(cfg).model_fields:
        path = f"{prefix}{name}"
        value = getattr(cfg, name)
        if name not in cfg.model_fields_set:
            defaulted.append(path)
        elif isinstance(value, BaseModel):
            defaulted.extend(defaulted_fields(value, f"{path}."))
        elif isinstance(value, dict):
            for key, item in value.items():
                if isinstance(item, BaseModel):
                    defaulted.extend(defaulted_fields(item, f"{path}.{key}."))
        elif isinstance(value, list):
            for index, item in enumerate(value):
                if isinstance(item, BaseModel):
                    defaulted.extend(defaulted_fields(item, f"{path}.{index}."))
    return defaulted


def with_override(cfg: RunConfig, parameter_path: str, value: Any) -> RunConfig:
    """Copy of ``cfg`` with the scalar at ``parameter_path`` replaced."""
    document = cfg.model_dump(mode="json", exclude_unset=False)
    parts = parameter_path.split(".")
    node: Any = document
    for part in parts[:-1]:
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise UsageError(f"unknown parameter path {parameter_path!r}")
    leaf = parts[-1]
    if isinstance(node, list) and leaf.isdigit() and int(leaf) < len(node):
        current, key = node[int(leaf)], int(leaf)
    elif isinstance(node, dict) and leaf in node:
        current, key = node[leaf], leaf
    else:
        raise UsageError(f"unknown parameter path {parameter_path!r}")
    if isinstance(current, dict | list):
        raise UsageError(f"parameter path {parameter_path!r} does not address a scalar")
    node[key] = value
    return parse_config(document)


def resolve_species(cfg: RunConfig, name: str) -> Species:
    section = cfg.species.get(name)
    if section is None:
        if name not in BUILTIN_SPECIES:
            raise ConfigError(f"undefined species {name!r}", key=name)
        return BUILTIN_SPECIES[name]
    charge = section.charge_e * CODATA2018.elementary_charge
    if section.spin_moment is not None:
        return Species.from_moment(name, charge, section.mass_kg, section.spin_moment)
    assert section.g_factor is not None
    return Species.from_g(name, charge, section.mass_kg, section.g_factor)


def build_zone(cfg: RunConfig, name: str) -> TrapZone:
    section = cfg.zones.get(name)
    if section is None:
        raise ConfigError(f"undefined zone {name!r}", key=name)
    try:
        return TrapZone(name=name, **section.model_dump())
    except DomainError as exc:
        raise ConfigError(str(exc), key=f"zones.{name}") from exc


def cooling_model(cfg: RunConfig) -> CoolingModel:
    return CoolingModel(
        tau_resistive=cfg.cooling.tau_resistive, T_equilibrium=cfg.cooling.T_equilibrium
    )


def axial_noise_model(cfg: RunConfig) -> AxialNoiseModel:
    if cfg.axial_noise is None:
        raise ConfigError("spin-flip detection needs [axial_noise]", key="axial_noise")
    return AxialNoiseModel(
        sigma0=cfg.axial_noise.sigma0, detection_time=cfg.axial_noise.detection_time
    )


def detection_repetitions(cfg: RunConfig) -> int:
    """Configured repetitions, or the fewest reaching ``classical.target_error``."""
    if cfg.double_trap.analysis_zone_detection_repetitions is not None:
        return cfg.double_trap.analysis_zone_detection_repetitions
    species = resolve_species(cfg, cfg.classical.species)
    zone = build_zone(cfg, cfg.classical.zone)
    cm, nm = cooling_model(cfg), axial_noise_model(cfg)
    _, _, p_single = detection_operating_point(
        species, zone, nm, cm, perturbed_modes(species, zone)
    )
    return required_repetitions(p_single, cfg.classical.target_error)


def double_trap_timings(cfg: RunConfig) -> DoubleTrapTimings:
    return DoubleTrapTimings(
        transport_time=cfg.double_trap.transport_time,
        precision_zone_interrogation_time=cfg.double_trap.precision_zone_interrogation_time,
        analysis_zone_detection_repetitions=detection_repetitions(cfg),
    )


def readout_sequence(cfg: RunConfig) -> ReadoutSequence:
    return ReadoutSequence(
        steps=tuple(
            ReadoutStep(kind=step.kind, duration=step.duration, fidelity=step.fidelity)
            for step in cfg.readout
        )
    )


def double_well(cfg: RunConfig, *, separation: float | None = None) -> DoubleWell:
    section = cfg.exchange
    return DoubleWell(
        separation=section.separation if separation is None else separation,
        species_a=resolve_species(cfg, section.species_a),
        species_b=resolve_species(cfg, section.species_b),
        omega_a=section.omega_a,
        omega_b=section.omega_b,
    )


def noise_channels(cfg: RunConfig) -> NoiseChannels:
    t2 = math.inf if cfg.qdyn.t2 is None else cfg.qdyn.t2
    return NoiseChannels(heating_rate=cfg.qdyn.heating_rate, t2=t2)


def sideband_drives(cfg: RunConfig) -> tuple[SidebandDrive, SidebandDrive]:
    q = cfg.qdyn
    particle = SidebandDrive(
        rabi=q.particle_rabi,
        kind="red_sideband",
        eta=q.particle_eta,
        lamb_dicke_limit=q.lamb_dicke_limit,
    )
    ion = SidebandDrive(
        rabi=q.ion_rabi, kind="red_sideband", eta=q.ion_eta, lamb_dicke_limit=q.lamb_dicke_limit
    )
    return particle, ion


def campaign_config(cfg: RunConfig) -> CampaignConfig:
    c = cfg.campaign
    species = resolve_species(cfg, c.species)
    if c.g_true is not None:
        species = Species.from_g(species.name, species.charge, species.mass, c.g_true)
    classical = None
    if c.mode == "classical_baseline":
        classical = ClassicalSetup(
            analysis_zone=build_zone(cfg, cfg.classical.zone),
            noise=axial_noise_model(cfg),
            cooling=cooling_model(cfg),
            timings=double_trap_timings(cfg),
        )
    return CampaignConfig(
        species=species,
        reference=resolve_species(cfg, c.reference),
        zone=build_zone(cfg, c.zone),
        scan=ScanPlan(
            points=c.points,
            span=c.span,
            shots=c.shots,
            probe_time=c.probe_time,
            shot_overhead=c.shot_overhead,
        ),
        readout=readout_sequence(cfg),
        drift=DriftModel(
            linear_rate=cfg.drift.linear_rate,
            random_walk_amplitude=cfg.drift.random_walk_amplitude,
        ),
        mode=c.mode,
        cycles=c.cycles,
        classical=classical,
        reference_relative_sigma=c.reference_relative_sigma,
        cyclotron_relative_sigma=c.cyclotron_relative_sigma,
        cooling_time=c.cooling_time,
        cyclotron_time=c.cyclotron_time,
        center_guess_offset=c.center_guess_offset,
        reference_every=c.reference_every,
        noiseless=c.noiseless,
    )
