"""Classical continuous Stern-Gerlach detection chain.

Cyclotron occupations are drawn from a thermal (geometric) distribution whose
mean relaxes toward n_th = k_B T / (hbar omega_plus) with the resistive
cooling time constant. Every axial-frequency sample carries Gaussian jitter
sigma0 * sqrt(n + 1); during spin detection n is the mean occupation
after the cooling wait.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .constants import CODATA2018
from .errors import ConfigError, DomainError
from .models import ModeFrequencies, SpinFlipDetection, Species, TrapZone
from .trap import bottle_axial_shift, effective_moment, perturbed_modes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoolingModel:
    tau_resistive: float = 100.0
    T_equilibrium: float = 4.2
    seed_stream: str = "classical/cooling"

    def __post_init__(self) -> None:
        if not self.tau_resistive > 0:
            raise DomainError("tau_resistive must be > 0")
        if not self.T_equilibrium > 0:
            raise DomainError("T_equilibrium must be > 0")


@dataclass(frozen=True)
class AxialNoiseModel:
    sigma0: float
    detection_time: float

    def __post_init__(self) -> None:
        if self.sigma0 < 0:
            raise DomainError("sigma0 must be >= 0")
        if not self.detection_time > 0:
            raise DomainError("detection_time must be > 0")

    def sigma(self, n_plus: float) -> float:
        return self.sigma0 * math.sqrt(n_plus + 1.0)


@dataclass(frozen=True)
class DoubleTrapTimings:
    transport_time: float
    precision_zone_interrogation_time: float
    analysis_zone_detection_repetitions: int

    def __post_init__(self) -> None:
        if self.transport_time < 0 or self.precision_zone_interrogation_time < 0:
            raise DomainError("double-trap timings must be >= 0")
        if self.analysis_zone_detection_repetitions < 1:
            raise DomainError("analysis_zone_detection_repetitions must be >= 1")


def thermal_occupation(cm: CoolingModel, modes: ModeFrequencies) -> float:
    return CODATA2018.k_boltzmann * cm.T_equilibrium / (CODATA2018.hbar * modes.omega_plus)


def mean_occupation(n_initial: float, cm: CoolingModel, modes: ModeFrequencies, t: float) -> float:
    n_th = thermal_occupation(cm, modes)
    return n_th + (n_initial - n_th) * math.exp(-t / cm.tau_resistive)


def sample_thermal(
    n_bar: float, rng: np.random.Generator, size: int | None = None
) -> int | np.ndarray:
    if n_bar < 0:
        raise DomainError(f"mean occupation must be >= 0, got {n_bar}")
    if n_bar == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    # numpy's geometric counts trials (support >= 1); occupations start at 0.
    draws = rng.geometric(1.0 / (1.0 + n_bar), size=size) - 1
    return int(draws) if size is None else draws


def resistive_cool(
    n_initial: int,
    cm: CoolingModel,
    modes: ModeFrequencies,
    t: float,
    rng: np.random.Generator,
    *,
    size: int | None = None,
) -> int | np.ndarray:
    if n_initial < 0:
        raise DomainError(f"n_initial must be >= 0, got {n_initial}")
    if t < 0:
        raise DomainError(f"cooling time must be >= 0, got {t}")
    return sample_thermal(mean_occupation(n_initial, cm, modes, t), rng, size)


def axial_sample(
    true_omega_z: float,
    n_plus: float | np.ndarray,
    nm: AxialNoiseModel,
    rng: np.random.Generator,
    *,
    size: int | None = None,
) -> float | np.ndarray:
    if not true_omega_z > 0:
        raise DomainError("true_omega_z must be > 0")
    sigma = nm.sigma0 * np.sqrt(np.asarray(n_plus, dtype=float) + 1.0)
    if nm.sigma0 == 0:
        if size is None and np.ndim(sigma) == 0:
            return float(true_omega_z)
        return np.full(size if size is not None else np.shape(sigma), float(true_omega_z))
    draws = true_omega_z + rng.normal(0.0, sigma, size=size)
    return float(draws) if np.ndim(draws) == 0 else draws


def single_shot_error(spin_shift: float, sigma: float) -> float:
    """Error of the before/after threshold test at half the expected shift."""
    if sigma == 0:
        return 0.0
    # The statistic is a difference of two samples, hence sqrt(2) * sigma.
    return float(stats.norm.cdf(-abs(spin_shift) / (2.0 * math.sqrt(2.0) * sigma)))


def majority_rates(p_single: float, repetitions: int) -> tuple[float, float]:
    """(missed flip, false alarm) probabilities of the majority vote.

    Ties are decided as "no flip".
    """
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    half = repetitions // 2
    missed = float(stats.binom.cdf(half, repetitions, 1.0 - p_single))
    false_alarm = float(stats.binom.sf(half, repetitions, p_single))
    return missed, false_alarm


def majority_error(p_single: float, repetitions: int) -> float:
    """Majority-vote error averaged over the flip / no-flip hypotheses."""
    missed, false_alarm = majority_rates(p_single, repetitions)
    return 0.5 * (missed + false_alarm)


def required_repetitions(p_single: float, target: float, *, limit: int = 100_001) -> int:
    if not 0 < target < 1:
        raise DomainError("target error probability must lie in (0, 1)")
    if p_single >= 0.5:
        raise DomainError(f"single-shot error {p_single:.3f} >= 0.5 cannot be voted down")
    for repetitions in range(1, limit + 1, 2):
        if majority_error(p_single, repetitions) < target:
            return repetitions
    raise DomainError(f"target error {target} not reached within {limit} repetitions")


def spin_shift(s: Species, z: TrapZone, modes: ModeFrequencies, n_plus: int) -> float:
    """Axial-frequency difference between spin up and spin down at fixed n_plus."""
    up = bottle_axial_shift(effective_moment(s, True, n_plus, modes), z, s, modes)
    down = bottle_axial_shift(effective_moment(s, False, n_plus, modes), z, s, modes)
    return up - down


def detection_operating_point(
    s: Species,
    z_analysis: TrapZone,
    nm: AxialNoiseModel,
    cm: CoolingModel,
    modes: ModeFrequencies,
    *,
    cooling_wait: float | None = None,
    n_initial: int | None = None,
) -> tuple[float, float, float]:
    """(n_bar, expected spin shift, single-shot error) after one cooling wait.

    Axial samples carry the jitter of the mean occupation n_bar, so the
    single-shot error is the Gaussian overlap at sigma(n_bar).
    """
    if not z_analysis.B2 > 0:
        raise ConfigError(
            f"zone {z_analysis.name}: spin detection needs a magnetic bottle (B2 > 0)",
            key="B2",
        )
    wait = 3.0 * cm.tau_resistive if cooling_wait is None else cooling_wait
    start = round(thermal_occupation(cm, modes)) if n_initial is None else n_initial
    n_bar = mean_occupation(start, cm, modes, wait)
    shift = spin_shift(s, z_analysis, modes, round(n_bar))
    if not shift > 0:
        raise ConfigError(
            f"zone {z_analysis.name}: spin shift {shift:.3e} rad/s is not positive",
            key="B2",
        )
    return n_bar, shift, single_shot_error(shift, nm.sigma(n_bar))


def detect_spin_flip(
    s: Species,
    z_analysis: TrapZone,
    nm: AxialNoiseModel,
    cm: CoolingModel,
    repetitions: int,
    rng: np.random.Generator,
    *,
    flip_occurred: bool = True,
    cooling_wait: float | None = None,
    n_initial: int | None = None,
    modes: ModeFrequencies | None = None,
) -> SpinFlipDetection:
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    modes = modes or perturbed_modes(s, z_analysis)
    wait = 3.0 * cm.tau_resistive if cooling_wait is None else cooling_wait
    start = round(thermal_occupation(cm, modes)) if n_initial is None else n_initial
    n_bar, expected_shift, p_single = detection_operating_point(
        s, z_analysis, nm, cm, modes, cooling_wait=wait, n_initial=start
    )

    # The sampled n_plus sets the orbital moment; the jitter follows n_bar.
    votes = 0
    occupations: list[int] = []
    n_plus = start
    for _ in range(repetitions):
        n_plus = int(resistive_cool(n_plus, cm, modes, wait, rng))
        occupations.append(n_plus)
        base = modes.omega_z + bottle_axial_shift(
            effective_moment(s, False, n_plus, modes), z_analysis, s, modes
        )
        flipped = modes.omega_z + bottle_axial_shift(
            effective_moment(s, flip_occurred, n_plus, modes), z_analysis, s, modes
        )
        before = axial_sample(base, n_bar, nm, rng)
        after = axial_sample(flipped, n_bar, nm, rng)
        if float(after) - float(before) > expected_shift / 2.0:
            votes += 1

    decision = votes > repetitions / 2
    return SpinFlipDetection(
        decision=decision,
        error_prob=majority_error(p_single, repetitions),
        wall_time=repetitions * (wait + 2.0 * nm.detection_time),
        repetitions=repetitions,
        n_plus_mean=float(np.mean(occupations)),
        spin_shift=expected_shift,
        flip_occurred=flip_occurred,
    )


def double_trap_cycle(timings: DoubleTrapTimings, detection: SpinFlipDetection) -> float:
    """Wall time of one precision-zone / analysis-zone cycle.

    Transport is counted twice: into the analysis zone and back.
    """
    return (
        2.0 * timings.transport_time
        + timings.precision_zone_interrogation_time
        + detection.wall_time
    )
