from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

from .constants import CODATA2018
from .errors import DomainError, UnstableTrapError

INVARIANCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Species:
    name: str
    charge: float
    mass: float
    g_factor: float
    spin_moment: float

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise DomainError(f"species {self.name}: mass must be > 0")
        if self.charge == 0:
            raise DomainError(f"species {self.name}: charge must be non-zero")
        if self.g_factor == 0 or math.copysign(1.0, self.spin_moment) != math.copysign(
            1.0, self.g_factor
        ):
            raise DomainError(f"species {self.name}: spin_moment must have the sign of g_factor")

    @classmethod
    def from_g(cls, name: str, charge: float, mass: float, g_factor: float) -> Species:
        mu = g_factor * abs(charge) * CODATA2018.hbar / (4.0 * mass)
        return cls(name=name, charge=charge, mass=mass, g_factor=g_factor, spin_moment=mu)

    @classmethod
    def from_moment(cls, name: str, charge: float, mass: float, spin_moment: float) -> Species:
        # Effective g relative to the particle's own q/m, so omega_L = 2*mu*B/hbar.
        g = 4.0 * mass * spin_moment / (abs(charge) * CODATA2018.hbar)
        return cls(name=name, charge=charge, mass=mass, g_factor=g, spin_moment=spin_moment)

    @property
    def charge_to_mass(self) -> float:
        return abs(self.charge) / self.mass

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "charge": self.charge,
            "mass": self.mass,
            "g_factor": self.g_factor,
            "spin_moment": self.spin_moment,
        }


@dataclass(frozen=True)
class TrapZone:
    name: str
    B0: float
    V0: float
    d_char: float
    B2: float = 0.0
    c2: float = 0.5
    tilt_theta: float = 0.0
    ellipticity: float = 0.0

    def __post_init__(self) -> None:
        if not self.B0 > 0:
            raise DomainError(f"zone {self.name}: B0 must be > 0")
        if not self.d_char > 0:
            raise DomainError(f"zone {self.name}: d_char must be > 0")
        if not self.V0 > 0:
            raise DomainError(f"zone {self.name}: V0 must be > 0")
        if not self.c2 > 0:
            raise DomainError(f"zone {self.name}: c2 must be > 0")
        if not abs(self.tilt_theta) < 0.1:
            raise DomainError(f"zone {self.name}: |tilt_theta| must be < 0.1 rad")
        if not abs(self.ellipticity) < 0.5:
            raise DomainError(f"zone {self.name}: |ellipticity| must be < 0.5")

    @property
    def is_ideal(self) -> bool:
        return self.tilt_theta == 0.0 and self.ellipticity == 0.0

    def with_field(self, B0: float) -> TrapZone:
        return replace(self, B0=B0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "B0": self.B0,
            "B2": self.B2,
            "V0": self.V0,
            "d_char": self.d_char,
            "c2": self.c2,
            "tilt_theta": self.tilt_theta,
            "ellipticity": self.ellipticity,
        }


@dataclass(frozen=True)
class ModeFrequencies:
    omega_plus: float
    omega_minus: float
    omega_z: float
    omega_c_free: float

    def __post_init__(self) -> None:
        if not self.omega_plus > self.omega_z > self.omega_minus > 0:
            raise UnstableTrapError(
                "mode hierarchy omega_plus > omega_z > omega_minus > 0 violated",
                frequencies=(self.omega_plus, self.omega_z, self.omega_minus),
            )
        if abs(self.invariance_residual()) > INVARIANCE_TOLERANCE:
            raise DomainError(
                f"invariance theorem violated: relative residual {self.invariance_residual():.3e}"
            )

    @property
    def stable(self) -> bool:
        """Bound motion: ordered real modes and omega_c^2 > 2 omega_z^2."""
        return (
            self.omega_plus > self.omega_z > self.omega_minus > 0
            and self.omega_c_free**2 > 2.0 * self.omega_z**2
        )

    def invariance_residual(self) -> float:
        total = self.omega_plus**2 + self.omega_minus**2 + self.omega_z**2
        return (total - self.omega_c_free**2) / self.omega_c_free**2

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega_plus": self.omega_plus,
            "omega_minus": self.omega_minus,
            "omega_z": self.omega_z,
            "omega_c": self.omega_c_free,
            "invariance_residual": self.invariance_residual(),
        }


@dataclass(frozen=True)
class SpinFlipDetection:
    decision: bool
    error_prob: float
    wall_time: float
    repetitions: int
    n_plus_mean: float
    spin_shift: float
    flip_occurred: bool

    @property
    def decision_correct(self) -> bool:
        return self.decision == self.flip_occurred

    def to_dict(self) -> dict[str, Any]:
        return {
            "decision": self.decision,
            "error_prob": self.error_prob,
            "wall_time": self.wall_time,
            "repetitions": self.repetitions,
            "n_plus_mean": self.n_plus_mean,
            "spin_shift": self.spin_shift,
            "flip_occurred": self.flip_occurred,
        }


@dataclass(frozen=True)
class ReadoutOutcome:
    bright: bool
    duration: float

    def to_dict(self) -> dict[str, Any]:
        return {"bright": self.bright, "duration": self.duration}


@dataclass(frozen=True)
class CoolingOutcome:
    final_n_bar: float
    pulse_count: int
    converged: bool
    history: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "final_n_bar": self.final_n_bar,
            "pulse_count": self.pulse_count,
            "converged": self.converged,
            "history": list(self.history),
        }


@dataclass(frozen=True)
class ResonanceFit:
    omega_hat: float
    sigma: float
    amplitude: float
    amplitude_sigma: float
    chi2: float
    residuals: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega_hat": self.omega_hat,
            "sigma": self.sigma,
            "amplitude": self.amplitude,
            "amplitude_sigma": self.amplitude_sigma,
            "chi2": self.chi2,
        }


@dataclass(frozen=True)
class LarmorReading:
    timestamp: float
    omega: float
    sigma: float


@dataclass(frozen=True)
class FlywheelResult:
    ratio: float
    ratio_sigma: float
    uncorrected_ratio: float
    window_ratios: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "ratio": self.ratio,
            "ratio_sigma": self.ratio_sigma,
            "uncorrected_ratio": self.uncorrected_ratio,
            "windows": len(self.window_ratios),
        }


@dataclass(frozen=True)
class LineshapeScan:
    center_guess: float
    detunings: tuple[float, ...]
    shots: int
    counts: tuple[float, ...]
    rabi_frequency: float
    probe_time: float
    timestamps: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.shots <= 0:
            raise DomainError("scan shots must be > 0")
        if len(self.counts) != len(self.detunings):
            raise DomainError("scan counts and detunings differ in length")
        if any(c < 0 or c > self.shots for c in self.counts):
            raise DomainError("scan counts must lie in [0, shots]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "center_guess": self.center_guess,
            "detunings": list(self.detunings),
            "shots": self.shots,
            "counts": list(self.counts),
            "rabi_frequency": self.rabi_frequency,
            "probe_time": self.probe_time,
        }


@dataclass(frozen=True)
class ShotRecord:
    timestamp_s: float
    kind: str
    detuning_rad_s: float
    outcome: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "timestamp_s": self.timestamp_s,
            "kind": self.kind,
            "detuning_rad_s": self.detuning_rad_s,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class CycleRecord:
    index: int
    omega_l: float
    omega_l_sigma: float
    omega_c: float
    omega_c_sigma: float
    g: float
    g_sigma: float
    wall_time: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "omega_l": self.omega_l,
            "omega_l_sigma": self.omega_l_sigma,
            "omega_c": self.omega_c,
            "omega_c_sigma": self.omega_c_sigma,
            "g": self.g,
            "g_sigma": self.g_sigma,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class CampaignReport:
    g_estimate: float
    g_sigma: float
    total_wall_time: float
    mode: str
    seed: int
    species: str
    g_true: float
    cycles: tuple[CycleRecord, ...]
    shots: tuple[ShotRecord, ...] = ()
    assumptions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.g_sigma > 0:
            raise DomainError("campaign g_sigma must be > 0")

    @property
    def per_detection_time(self) -> float:
        return self.total_wall_time / max(1, len(self.shots))

    def to_dict(self) -> dict[str, Any]:
        return {
            "g_estimate": self.g_estimate,
            "g_sigma": self.g_sigma,
            "wall_time": self.total_wall_time,
            "mode": self.mode,
            "seed": self.seed,
            "species": self.species,
            "g_true": self.g_true,
            "per_detection_time": self.per_detection_time,
            "cycles": [cycle.to_dict() for cycle in self.cycles],
            "assumptions": list(self.assumptions),
        }
