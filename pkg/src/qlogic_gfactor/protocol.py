"""Readout sequences, drifting-field lineshape scans and g-factor campaigns."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import Literal, Protocol

import numpy as np
from scipy import optimize

from .classical import (
    AxialNoiseModel,
    CoolingModel,
    DoubleTrapTimings,
    detect_spin_flip,
    detection_operating_point,
    majority_rates,
)
from .errors import AlignmentError, ConfigError, DomainError, EstimationError
from .models import (
    CampaignReport,
    CycleRecord,
    FlywheelResult,
    LarmorReading,
    LineshapeScan,
    ModeFrequencies,
    ReadoutOutcome,
    ResonanceFit,
    ShotRecord,
    Species,
    TrapZone,
)
from .species import BUILTIN_SPECIES, cpt_ratio, g_from_frequencies, larmor_frequency
from .streams import derive_seed, substream
from .trap import cyclotron_from_modes, perturbed_modes

logger = logging.getLogger(__name__)

STEP_KINDS = (
    "larmor_probe",
    "proton_red_sideband_pi",
    "exchange_swap",
    "be_red_sideband_pi",
    "fluorescence_detect",
)

CampaignMode = Literal["quantum_logic", "classical_baseline"]
ShotHook = Callable[[float], None]


@dataclass(frozen=True)
class ReadoutStep:
    kind: str
    duration: float
    fidelity: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in STEP_KINDS:
            raise DomainError(f"unknown readout step {self.kind!r}")
        if not self.duration > 0:
            raise DomainError(f"step {self.kind}: duration must be > 0")
        if not 0.0 < self.fidelity <= 1.0:
            raise DomainError(f"step {self.kind}: fidelity must lie in (0, 1]")


@dataclass(frozen=True)
class ReadoutSequence:
    steps: tuple[ReadoutStep, ...]

    def __post_init__(self) -> None:
        if not self.steps or self.steps[-1].kind != "fluorescence_detect":
            raise DomainError("a readout sequence must end with fluorescence_detect")
        order = [STEP_KINDS.index(step.kind) for step in self.steps]
        if order != sorted(set(order)):
            raise DomainError("readout steps must be unique and in protocol order")

    @property
    def total_duration(self) -> float:
        return math.fsum(step.duration for step in self.steps)

    @property
    def readout_duration(self) -> float:
        """Duration excluding the Larmor probe, which a scan times separately."""
        return math.fsum(step.duration for step in self.steps if step.kind != "larmor_probe")

    @property
    def transfer_steps(self) -> tuple[ReadoutStep, ...]:
        return self.steps[:-1]

    @property
    def detection_fidelity(self) -> float:
        return self.steps[-1].fidelity


def run_readout(
    proton_spin_up: bool, seq: ReadoutSequence, rng: np.random.Generator
) -> ReadoutOutcome:
    """One pass through the transfer chain with classical branching.

    Every transfer step can lose the excitation; detection flips the
    bright/dark assignment with probability 1 - f_detect.
    """
    excited = proton_spin_up
    for step in seq.transfer_steps:
        if excited and rng.random() >= step.fidelity:
            excited = False
    correct = rng.random() < seq.detection_fidelity
    return ReadoutOutcome(bright=excited if correct else not excited, duration=seq.total_duration)


def readout_response(seq: ReadoutSequence) -> tuple[float, float]:
    """(P(bright | up), P(bright | down)) by enumerating every branch."""
    p_bright = {True: 0.0, False: 0.0}
    for spin_up in (True, False):
        for branch in itertools.product((True, False), repeat=len(seq.steps)):
            probability = 1.0
            excited = spin_up
            for step, success in zip(seq.steps, branch):
                probability *= step.fidelity if success else 1.0 - step.fidelity
            for step, success in zip(seq.transfer_steps, branch):
                excited = excited and success
            bright = excited if branch[-1] else not excited
            if bright:
                p_bright[spin_up] += probability
    return p_bright[True], p_bright[False]


def assignment_fidelity(seq: ReadoutSequence) -> float:
    bright_up, bright_down = readout_response(seq)
    return 0.5 * (bright_up + (1.0 - bright_down))


@dataclass(frozen=True)
class DriftModel:
    linear_rate: float = 0.0
    random_walk_amplitude: float = 0.0
    seed_stream: str = "protocol/drift"

    def __post_init__(self) -> None:
        if self.random_walk_amplitude < 0:
            raise DomainError("random_walk_amplitude must be >= 0")

    @property
    def is_static(self) -> bool:
        return self.linear_rate == 0 and self.random_walk_amplitude == 0


class DriftProcess:
    """Field offset B(t) - B0 sampled at non-decreasing times."""

    def __init__(self, model: DriftModel, rng: np.random.Generator) -> None:
        self.model = model
        self._rng = rng
        self._time = 0.0
        self._walk = 0.0

    def at(self, t: float) -> float:
        if t < self._time:
            raise DomainError(f"drift sampled backwards in time ({t} < {self._time})")
        if t > self._time and self.model.random_walk_amplitude > 0:
            step = self.model.random_walk_amplitude * math.sqrt(t - self._time)
            self._walk += float(self._rng.normal(0.0, step))
        self._time = t
        return self.model.linear_rate * t + self._walk

    def sample(self, timestamps: Sequence[float]) -> np.ndarray:
        return np.array([self.at(t) for t in timestamps])


def rabi_probability(detuning: float | np.ndarray, rabi: float, t: float) -> np.ndarray:
    """Spin-flip probability of a square pulse, Omega^2/W^2 sin^2(W t / 2)."""
    detuning = np.asarray(detuning, dtype=float)
    generalized_sq = rabi**2 + detuning**2
    generalized = np.sqrt(generalized_sq)
    return np.asarray(rabi**2 / generalized_sq * np.sin(generalized * t / 2.0) ** 2)


class Discriminator(Protocol):
    """Per-shot spin-flip discriminator: outcome and wall time spent."""

    @property
    def duration(self) -> float: ...

    def __call__(self, flipped: bool, rng: np.random.Generator) -> tuple[bool, float]: ...

    def response(self) -> tuple[float, float]: ...


@dataclass(frozen=True)
class IdealDiscriminator:
    duration: float = 0.0

    def __call__(self, flipped: bool, rng: np.random.Generator) -> tuple[bool, float]:
        return flipped, self.duration

    def response(self) -> tuple[float, float]:
        return 1.0, 0.0


@dataclass(frozen=True)
class QuantumLogicDiscriminator:
    sequence: ReadoutSequence

    @property
    def duration(self) -> float:
        return self.sequence.readout_duration

    def __call__(self, flipped: bool, rng: np.random.Generator) -> tuple[bool, float]:
        outcome = run_readout(flipped, self.sequence, rng)
        return outcome.bright, self.duration

    def response(self) -> tuple[float, float]:
        return readout_response(self.sequence)


@dataclass(frozen=True)
class ClassicalSetup:
    analysis_zone: TrapZone
    noise: AxialNoiseModel
    cooling: CoolingModel
    timings: DoubleTrapTimings


class ContinuousSternGerlachDiscriminator:
    """Double-trap spin-flip detection used as a scan discriminator."""

    def __init__(self, species: Species, setup: ClassicalSetup) -> None:
        self.species = species
        self.setup = setup
        self.modes: ModeFrequencies = perturbed_modes(species, setup.analysis_zone)
        repetitions = setup.timings.analysis_zone_detection_repetitions
        wait = 3.0 * setup.cooling.tau_resistive
        _, _, p_single = detection_operating_point(
            species, setup.analysis_zone, setup.noise, setup.cooling, self.modes
        )
        self._rates = majority_rates(p_single, repetitions)
        detection = repetitions * (wait + 2.0 * setup.noise.detection_time)
        self.duration = 2.0 * setup.timings.transport_time + detection

    def __call__(self, flipped: bool, rng: np.random.Generator) -> tuple[bool, float]:
        result = detect_spin_flip(
            self.species,
            self.setup.analysis_zone,
            self.setup.noise,
            self.setup.cooling,
            self.setup.timings.analysis_zone_detection_repetitions,
            rng,
            flip_occurred=flipped,
            modes=self.modes,
        )
        return result.decision, 2.0 * self.setup.timings.transport_time + result.wall_time

    def response(self) -> tuple[float, float]:
        missed, false_alarm = self._rates
        return 1.0 - missed, false_alarm


@dataclass(frozen=True)
class ScanPlan:
    points: int = 11
    span: float = 2.0
    shots: int = 50
    probe_time: float = 0.02
    shot_overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.points < 5:
            raise DomainError("a lineshape scan needs at least 5 points")
        if self.shots < 1:
            raise DomainError("shots per point must be >= 1")
        if not self.span > 0 or not self.probe_time > 0:
            raise DomainError("scan span and probe_time must be > 0")
        if self.shot_overhead < 0:
            raise DomainError("shot_overhead must be >= 0")

    @property
    def rabi_frequency(self) -> float:
        """Drive strength making the probe a resonant pi-pulse."""
        return math.pi / self.probe_time

    def detunings(self) -> np.ndarray:
        half_width = self.span * self.rabi_frequency
        return np.linspace(-half_width, half_width, self.points)


@dataclass(frozen=True)
class ScanOutcome:
    scan: LineshapeScan
    records: tuple[ShotRecord, ...]
    end_time: float


def scan_lineshape(
    center_guess: float,
    plan: ScanPlan,
    resonance: Callable[[float], float],
    rng: np.random.Generator,
    *,
    discriminator: Discriminator | None = None,
    start_time: float = 0.0,
    noiseless: bool = False,
    on_shot: ShotHook | None = None,
    kind: str = "larmor",
) -> ScanOutcome:
    """Scan trial frequencies around ``center_guess`` against a moving resonance.

    ``resonance(t)`` gives the true line center at shot time t. In noiseless
    mode each shot contributes its expected discriminator outcome.
    """
    discriminator = discriminator or IdealDiscriminator()
    on_flip, on_still = discriminator.response()
    rabi = plan.rabi_frequency
    clock = start_time
    counts: list[float] = []
    mean_times: list[float] = []
    records: list[ShotRecord] = []
    for detuning in plan.detunings():
        total = 0.0
        times = []
        for _ in range(plan.shots):
            offset = center_guess + detuning - resonance(clock)
            p_flip = float(rabi_probability(offset, rabi, plan.probe_time))
            if noiseless:
                outcome = on_flip * p_flip + on_still * (1.0 - p_flip)
                spent = discriminator.duration
            else:
                positive, spent = discriminator(bool(rng.random() < p_flip), rng)
                outcome = 1.0 if positive else 0.0
            total += outcome
            times.append(clock)
            records.append(ShotRecord(clock, kind, float(detuning), outcome))
            if on_shot is not None:
                on_shot(clock)
            clock += plan.probe_time + spent + plan.shot_overhead
        counts.append(min(total, float(plan.shots)))
        mean_times.append(float(np.mean(times)))
    scan = LineshapeScan(
        center_guess=center_guess,
        detunings=tuple(float(d) for d in plan.detunings()),
        shots=plan.shots,
        counts=tuple(counts),
        rabi_frequency=rabi,
        probe_time=plan.probe_time,
        timestamps=tuple(mean_times),
    )
    return ScanOutcome(scan=scan, records=tuple(records), end_time=clock)


def fit_resonance(
    scan: LineshapeScan, *, baseline: float = 0.0, initial_center: float | None = None
) -> ResonanceFit:
    """Weighted least-squares fit of the Rabi lineshape (free center and amplitude).

    The first pass weights by the observed binomial variance, the second by the
    variance of the first-pass model. ``baseline`` is the known no-flip level.
    """
    if len(scan.detunings) < 5:
        raise DomainError("fit_resonance needs at least 5 scan points")
    if not 0.0 <= baseline < 1.0:
        raise DomainError("baseline must lie in [0, 1)")
    rabi, shots = scan.rabi_frequency, scan.shots
    x = np.asarray(scan.detunings) / rabi
    y = np.asarray(scan.counts) / shots
    variance_floor = 0.25 / shots

    def model(params: np.ndarray) -> np.ndarray:
        center, amplitude = params
        return baseline + amplitude * rabi_probability((x - center) * rabi, rabi, scan.probe_time)

    def weights_from(p: np.ndarray) -> np.ndarray:
        return np.sqrt(shots / np.maximum(p * (1.0 - p), variance_floor))

    if initial_center is None:
        start = float(x[int(np.argmax(y))])
    else:
        start = (initial_center - scan.center_guess) / rabi
    start = float(np.clip(start, x.min(), x.max()))
    amplitude0 = float(np.clip(y.max() - baseline, 0.05, 1.5))
    params = np.array([start, amplitude0])
    weights = weights_from(y)
    result = None
    for _ in range(2):
        result = optimize.least_squares(
            lambda p, w=weights: (model(p) - y) * w,
            params,
            bounds=([x.min(), 0.0], [x.max(), 2.0]),
            method="trf",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        if not result.success or not np.all(np.isfinite(result.x)):
            raise EstimationError(
                f"lineshape fit did not converge: {result.message}",
                residuals=tuple(float(r) for r in result.fun),
            )
        params = result.x
        weights = weights_from(model(params))
    assert result is not None

    residuals = tuple(float(r) for r in result.fun)
    if not params[1] > 0:
        raise EstimationError("lineshape fit found no resonance amplitude", residuals=residuals)
    try:
        covariance = np.linalg.inv(result.jac.T @ result.jac)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"singular fit covariance: {exc}", residuals=residuals) from exc
    if not np.all(np.isfinite(covariance)) or covariance[0, 0] <= 0:
        raise EstimationError("fit covariance is not positive", residuals=residuals)

    return ResonanceFit(
        omega_hat=scan.center_guess + float(params[0]) * rabi,
        sigma=math.sqrt(float(covariance[0, 0])) * rabi,
        amplitude=float(params[1]),
        amplitude_sigma=math.sqrt(max(float(covariance[1, 1]), 0.0)),
        chi2=float(np.sum(result.fun**2)),
        residuals=residuals,
    )


def _reference_at(
    t: float, times: np.ndarray, omegas: np.ndarray, sigmas: np.ndarray
) -> tuple[float, float]:
    if times.size == 1:
        if t != times[0]:
            raise AlignmentError(f"no reference reading aligned with t={t}")
        return float(omegas[0]), float(sigmas[0])
    spacing = float(np.max(np.diff(times)))
    if t < times[0] - spacing or t > times[-1] + spacing:
        raise AlignmentError(
            f"reading at t={t:.6g} s lies outside the reference window "
            f"[{times[0]:.6g}, {times[-1]:.6g}] s"
        )
    if t < times[0] or t > times[-1]:
        # Linear extrapolation over at most one reference spacing.
        i = 0 if t < times[0] else times.size - 2
        slope = (omegas[i + 1] - omegas[i]) / (times[i + 1] - times[i])
        return float(omegas[i] + slope * (t - times[i])), float(max(sigmas[i], sigmas[i + 1]))
    index = int(np.searchsorted(times, t))
    neighbours = sigmas[max(index - 1, 0) : index + 1]
    return float(np.interp(t, times, omegas)), float(np.max(neighbours))


def flywheel_correct(
    particle: Sequence[LarmorReading], reference: Sequence[LarmorReading]
) -> FlywheelResult:
    """Ratio of particle to reference Larmor frequency, aligned in time.

    The reference frequency is linearly interpolated to each particle
    timestamp, so common-mode field drift cancels to first order. The
    uncorrected ratio divides by the first reference reading only.
    """
    if not particle or not reference:
        raise AlignmentError("flywheel correction needs particle and reference readings")
    if any(not r.sigma > 0 for r in particle):
        raise DomainError("particle readings must carry sigma > 0")
    ordered = sorted(reference, key=lambda r: r.timestamp)
    times = np.array([r.timestamp for r in ordered])
    if np.any(np.diff(times) <= 0):
        raise AlignmentError("reference timestamps must be distinct")
    omegas = np.array([r.omega for r in ordered])
    sigmas = np.array([r.sigma for r in ordered])

    ratios: list[float] = []
    weights: list[float] = []
    for reading in particle:
        omega_ref, sigma_ref = _reference_at(reading.timestamp, times, omegas, sigmas)
        ratio = reading.omega / omega_ref
        relative = math.hypot(reading.sigma / reading.omega, sigma_ref / omega_ref)
        ratios.append(ratio)
        weights.append(1.0 / (ratio * relative) ** 2)

    w = np.asarray(weights)
    ratio = float(np.dot(w, ratios) / w.sum())
    p_weights = np.array([1.0 / r.sigma**2 for r in particle])
    p_mean = float(np.dot(p_weights, [r.omega for r in particle]) / p_weights.sum())
    return FlywheelResult(
        ratio=ratio,
        ratio_sigma=1.0 / math.sqrt(float(w.sum())),
        uncorrected_ratio=p_mean / float(omegas[0]),
        window_ratios=tuple(ratios),
    )


def measure_cyclotron(
    species: Species,
    zone: TrapZone,
    relative_sigma: float,
    rng: np.random.Generator,
    *,
    noiseless: bool = False,
) -> tuple[float, float]:
    """Noisy reads of the three eigenfrequencies recombined into omega_C."""
    if relative_sigma < 0:
        raise DomainError("relative_sigma must be >= 0")
    modes = perturbed_modes(species, zone)
    true = np.array([modes.omega_plus, modes.omega_minus, modes.omega_z])
    sigmas = relative_sigma * true
    reads = true if noiseless or relative_sigma == 0 else true + rng.normal(0.0, sigmas)
    omega_c = cyclotron_from_modes(*(float(v) for v in reads))
    sigma_c = float(np.sqrt(np.sum((reads * sigmas) ** 2))) / omega_c
    return omega_c, sigma_c


@dataclass(frozen=True)
class CampaignConfig:
    species: Species
    reference: Species
    zone: TrapZone
    scan: ScanPlan
    readout: ReadoutSequence
    drift: DriftModel = field(default_factory=DriftModel)
    mode: CampaignMode = "quantum_logic"
    cycles: int = 3
    classical: ClassicalSetup | None = None
    reference_relative_sigma: float = 0.0
    cyclotron_relative_sigma: float = 0.0
    cooling_time: float = 5.0
    cyclotron_time: float = 10.0
    center_guess_offset: float = 0.0
    reference_every: int = 1
    noiseless: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("quantum_logic", "classical_baseline"):
            raise ConfigError(f"unknown campaign mode {self.mode!r}", key="campaign.mode")
        if self.mode == "classical_baseline" and self.classical is None:
            raise ConfigError("classical_baseline mode needs a classical setup", key="classical")
        if self.cycles < 1:
            raise ConfigError("campaign needs at least one cycle", key="campaign.cycles")
        if self.reference_every < 1:
            raise ConfigError("reference_every must be >= 1", key="campaign.reference_every")
        if self.cooling_time < 0 or self.cyclotron_time < 0:
            raise ConfigError("campaign timings must be >= 0", key="campaign")

    def discriminator(self) -> Discriminator:
        if self.mode == "classical_baseline":
            assert self.classical is not None
            return ContinuousSternGerlachDiscriminator(self.species, self.classical)
        return QuantumLogicDiscriminator(self.readout)

    def assumptions(self) -> tuple[str, ...]:
        notes = [
            f"mode={self.mode}",
            "omega_C from Gaussian reads of the perturbed eigenfrequencies "
            f"(relative sigma {self.cyclotron_relative_sigma:g}) via the invariance theorem",
            f"field drift: linear {self.drift.linear_rate:g} T/s, "
            f"random walk {self.drift.random_walk_amplitude:g} T/sqrt(s)",
            f"reference ion {self.reference.name} sees the same B(t); read every "
            f"{self.reference_every} shot(s), relative sigma {self.reference_relative_sigma:g}",
            "Larmor probe in the precision zone, exchange on axial modes",
            f"cooling {self.cooling_time:g} s and omega_C measurement "
            f"{self.cyclotron_time:g} s per cycle",
        ]
        if self.mode == "classical_baseline":
            assert self.classical is not None
            notes.append(
                f"tau_resistive={self.classical.cooling.tau_resistive:g} s, "
                f"{self.classical.timings.analysis_zone_detection_repetitions} repetitions "
                "per spin-flip decision"
            )
        if self.noiseless:
            notes.append("noiseless: expected counts and exact frequency reads")
        return tuple(notes)


def run_campaign(cfg: CampaignConfig, seed: int) -> CampaignReport:
    species, zone = cfg.species, cfg.zone
    drift = DriftProcess(cfg.drift, substream(seed, cfg.drift.seed_stream))
    discriminator = cfg.discriminator()
    baseline = discriminator.response()[1]
    center_guess = larmor_frequency(species, zone.B0) * (1.0 + cfg.center_guess_offset)
    for note in cfg.assumptions():
        logger.info("campaign assumption: %s", note)

    def field_at(t: float) -> float:
        return zone.B0 + drift.at(t)

    cycles: list[CycleRecord] = []
    shots: list[ShotRecord] = []
    clock = 0.0
    for index in range(cfg.cycles):
        rng = substream(seed, "campaign/cycle", index)
        started = clock
        clock += cfg.cooling_time
        references: list[LarmorReading] = []

        def read_reference(t: float, rng: np.random.Generator = rng) -> LarmorReading:
            omega = larmor_frequency(cfg.reference, field_at(t))
            sigma = cfg.reference_relative_sigma * omega
            if not cfg.noiseless and sigma > 0:
                omega += float(rng.normal(0.0, sigma))
            return LarmorReading(timestamp=t, omega=omega, sigma=sigma)

        shot_counter = itertools.count()

        def on_shot(t: float) -> None:
            if next(shot_counter) % cfg.reference_every == 0:
                references.append(read_reference(t))

        outcome = scan_lineshape(
            center_guess,
            cfg.scan,
            lambda t: larmor_frequency(species, field_at(t)),
            rng,
            discriminator=discriminator,
            start_time=clock,
            noiseless=cfg.noiseless,
            on_shot=on_shot,
        )
        shots.extend(outcome.records)
        clock = outcome.end_time
        fit = fit_resonance(outcome.scan, baseline=baseline)
        probe_time = float(np.mean([r.timestamp_s for r in outcome.records]))

        omega_c, sigma_c = measure_cyclotron(
            species,
            zone.with_field(field_at(clock)),
            cfg.cyclotron_relative_sigma,
            rng,
            noiseless=cfg.noiseless,
        )
        at_cyclotron = read_reference(clock)
        references.append(at_cyclotron)
        flywheel = flywheel_correct(
            [LarmorReading(probe_time, fit.omega_hat, fit.sigma)], references
        )
        omega_l = flywheel.ratio * at_cyclotron.omega
        sigma_l = omega_l * math.hypot(
            flywheel.ratio_sigma / flywheel.ratio, at_cyclotron.sigma / at_cyclotron.omega
        )
        g = g_from_frequencies(omega_l, omega_c)
        g_sigma = g * math.hypot(sigma_l / omega_l, sigma_c / omega_c)
        clock += cfg.cyclotron_time
        cycles.append(
            CycleRecord(
                index=index,
                omega_l=omega_l,
                omega_l_sigma=sigma_l,
                omega_c=omega_c,
                omega_c_sigma=sigma_c,
                g=g,
                g_sigma=g_sigma,
                wall_time=clock - started,
            )
        )
        logger.debug("cycle %d: g=%.12g +- %.3g", index, g, g_sigma)

    weights = np.array([1.0 / c.g_sigma**2 for c in cycles])
    g_estimate = float(np.dot(weights, [c.g for c in cycles]) / weights.sum())
    return CampaignReport(
        g_estimate=g_estimate,
        g_sigma=1.0 / math.sqrt(float(weights.sum())),
        total_wall_time=clock,
        mode=cfg.mode,
        seed=seed,
        species=species.name,
        g_true=species.g_factor,
        cycles=tuple(cycles),
        shots=tuple(shots),
        assumptions=cfg.assumptions(),
    )


def conjugate_species(species: Species) -> Species:
    """Same mass and |g| with the charge reversed."""
    for candidate in BUILTIN_SPECIES.values():
        if (
            candidate.charge == -species.charge
            and candidate.mass == species.mass
            and candidate.g_factor == species.g_factor
        ):
            return candidate
    return replace(species, name=f"anti-{species.name}", charge=-species.charge)


@dataclass(frozen=True)
class CptComparison:
    particle: CampaignReport
    antiparticle: CampaignReport
    ratio: float
    ratio_sigma: float

    def to_dict(self) -> dict[str, object]:
        return {
            "particle": self.particle.species,
            "antiparticle": self.antiparticle.species,
            "g_particle": self.particle.g_estimate,
            "g_particle_sigma": self.particle.g_sigma,
            "g_antiparticle": self.antiparticle.g_estimate,
            "g_antiparticle_sigma": self.antiparticle.g_sigma,
            "ratio_minus_one": self.ratio,
            "ratio_sigma": self.ratio_sigma,
        }


def compare_cpt(cfg: CampaignConfig, seed: int) -> CptComparison:
    """Run the same campaign for a particle and its conjugate."""
    particle = run_campaign(cfg, derive_seed(seed, "cpt/particle"))
    mirror = replace(cfg, species=conjugate_species(cfg.species))
    antiparticle = run_campaign(mirror, derive_seed(seed, "cpt/antiparticle"))
    quotient = particle.g_estimate / antiparticle.g_estimate
    return CptComparison(
        particle=particle,
        antiparticle=antiparticle,
        ratio=cpt_ratio(particle.g_estimate, antiparticle.g_estimate),
        ratio_sigma=abs(quotient)
        * math.hypot(
            particle.g_sigma / particle.g_estimate, antiparticle.g_sigma / antiparticle.g_estimate
        ),
    )
