"""Quantum dynamics on truncated spin x Fock spaces.

Basis ordering: spin index slowest (0 = down, 1 = up), then mode occupations
in lexicographic order. All Hamiltonians are written as H / hbar in rad/s in
the rotating-wave approximation; propagators come from an exact
eigendecomposition, so piecewise-constant pulses are exact.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Literal

import numpy as np
from scipy import linalg

from .constants import CODATA2018
from .errors import DomainError, TruncationError
from .models import CoolingOutcome, Species

logger = logging.getLogger(__name__)

DEFAULT_N_MAX = 30
DEFAULT_GUARD = 1e-6
NORM_TOLERANCE = 1e-9

DriveKind = Literal["carrier", "red_sideband", "blue_sideband"]
_DRIVE_KINDS = ("carrier", "red_sideband", "blue_sideband")


@dataclass(frozen=True, eq=False)
class SpinMotionState:
    n_max: int
    mode_count: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.mode_count not in (1, 2):
            raise DomainError(f"mode_count must be 1 or 2, got {self.mode_count}")
        if self.n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {self.n_max}")
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        expected = 2 * (self.n_max + 1) ** self.mode_count
        if amplitudes.size != expected:
            raise DomainError(f"expected {expected} amplitudes, got {amplitudes.size}")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"state norm {norm:.12f} differs from 1")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def fock(cls, spin_up: bool, occupations: Sequence[int], n_max: int) -> SpinMotionState:
        mode_count = len(occupations)
        if any(n < 0 or n > n_max for n in occupations):
            raise DomainError(f"occupations {tuple(occupations)} outside [0, {n_max}]")
        amplitudes = np.zeros(2 * (n_max + 1) ** mode_count, dtype=complex)
        amplitudes[_basis_index(int(spin_up), occupations, n_max)] = 1.0
        return cls(n_max=n_max, mode_count=mode_count, amplitudes=amplitudes)

    @classmethod
    def from_motion(
        cls, spin_up: bool, motion: np.ndarray, n_max: int, mode_count: int
    ) -> SpinMotionState:
        """Product of a definite spin with a motional amplitude vector."""
        spin = np.array([0.0, 1.0]) if spin_up else np.array([1.0, 0.0])
        return cls(n_max=n_max, mode_count=mode_count, amplitudes=np.kron(spin, motion))

    @property
    def dimension(self) -> int:
        return int(self.amplitudes.size)

    def _tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) + (self.n_max + 1,) * self.mode_count)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def spin_up_probability(self) -> float:
        return float(np.sum(np.abs(self._tensor()[1]) ** 2))

    def occupation_distribution(self, mode: int = 0) -> np.ndarray:
        probabilities = np.abs(self._tensor()) ** 2
        axes = tuple(i for i in range(probabilities.ndim) if i != mode + 1)
        return np.asarray(probabilities.sum(axis=axes))

    def mean_occupation(self, mode: int = 0) -> float:
        distribution = self.occupation_distribution(mode)
        return float(np.dot(np.arange(self.n_max + 1), distribution))

    def top_population(self) -> float:
        return max(
            float(self.occupation_distribution(mode)[-1]) for mode in range(self.mode_count)
        )

    def fidelity(self, other: SpinMotionState) -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def label(self, index: int) -> str:
        spin, occupations = _basis_decode(index, self.n_max, self.mode_count)
        return f"{'up' if spin else 'down'}|{','.join(str(n) for n in occupations)}"


def _basis_index(spin: int, occupations: Sequence[int], n_max: int) -> int:
    index = spin
    for n in occupations:
        index = index * (n_max + 1) + n
    return index


def _basis_decode(index: int, n_max: int, mode_count: int) -> tuple[int, tuple[int, ...]]:
    occupations: list[int] = []
    for _ in range(mode_count):
        index, n = divmod(index, n_max + 1)
        occupations.append(n)
    return index, tuple(reversed(occupations))


def check_truncation(state: SpinMotionState, guard: float = DEFAULT_GUARD) -> None:
    top = state.top_population()
    if top >= guard:
        raise TruncationError(
            f"population {top:.3e} in |n_max={state.n_max}> exceeds guard {guard:.1e}",
            top_population=top,
        )


@dataclass(frozen=True)
class SidebandDrive:
    rabi: float
    kind: DriveKind = "carrier"
    eta: float = 0.0
    detuning: float = 0.0
    phase: float = 0.0
    lamb_dicke_limit: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in _DRIVE_KINDS:
            raise DomainError(f"unknown drive kind {self.kind!r}")
        if self.rabi < 0:
            raise DomainError("carrier Rabi frequency must be >= 0")
        if self.eta < 0:
            raise DomainError("Lamb-Dicke parameter must be >= 0")
        if self.eta >= self.lamb_dicke_limit:
            raise DomainError(
                f"Lamb-Dicke parameter {self.eta} outside the regime guard "
                f"{self.lamb_dicke_limit}"
            )

    @classmethod
    def from_gradient(
        cls,
        species: Species,
        omega_mode: float,
        gradient: float,
        rabi: float,
        *,
        kind: DriveKind = "red_sideband",
        detuning: float = 0.0,
        phase: float = 0.0,
        lamb_dicke_limit: float = 0.5,
    ) -> SidebandDrive:
        """Near-field drive with eta * rabi = |mu| * B' * z0 / (2 hbar)."""
        if not rabi > 0:
            raise DomainError("carrier Rabi frequency must be > 0")
        z0 = zero_point_extent(species, omega_mode)
        eta = abs(species.spin_moment) * gradient * z0 / (2.0 * CODATA2018.hbar * rabi)
        return cls(
            rabi=rabi,
            kind=kind,
            eta=eta,
            detuning=detuning,
            phase=phase,
            lamb_dicke_limit=lamb_dicke_limit,
        )

    def coupling(self) -> float:
        return self.rabi if self.kind == "carrier" else self.eta * self.rabi

    def rabi_rate(self, n: int) -> float:
        """Resonant Rabi frequency for the transition starting from |down, n>."""
        if self.kind == "carrier":
            return self.rabi
        if self.kind == "red_sideband":
            return self.eta * self.rabi * math.sqrt(n)
        return self.eta * self.rabi * math.sqrt(n + 1)

    def pi_time(self, n: int = 1) -> float:
        rate = self.rabi_rate(n)
        if not rate > 0:
            raise DomainError(f"{self.kind} drive has no coupling from n={n}")
        return math.pi / rate


def zero_point_extent(species: Species, omega: float) -> float:
    if not omega > 0:
        raise DomainError("mode frequency must be > 0")
    return math.sqrt(CODATA2018.hbar / (2.0 * species.mass * omega))


def _annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)


def _mode_operator(op: np.ndarray, mode: int, mode_count: int) -> np.ndarray:
    factors = [np.eye(op.shape[0]) for _ in range(mode_count)]
    factors[mode] = op
    return reduce(np.kron, factors)


_SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]])
_SIGMA_Z = np.diag([-1.0, 1.0])


def pulse_hamiltonian(
    drive: SidebandDrive, n_max: int, mode_count: int = 1, mode: int = 0
) -> np.ndarray:
    a = _mode_operator(_annihilation(n_max), mode, mode_count)
    identity = np.eye(a.shape[0])
    if drive.kind == "carrier":
        motion = identity
    elif drive.kind == "red_sideband":
        motion = a
    else:
        motion = a.conj().T
    raising = np.exp(1j * drive.phase) * np.kron(_SIGMA_PLUS, motion)
    hamiltonian = 0.5 * drive.coupling() * (raising + raising.conj().T)
    hamiltonian = hamiltonian - 0.5 * drive.detuning * np.kron(_SIGMA_Z, identity)
    return np.asarray(hamiltonian, dtype=complex)


def exchange_hamiltonian(rate: float, detuning: float, n_max: int) -> np.ndarray:
    """Motional-only H/hbar = rate (a b^dag + a^dag b) + detuning b^dag b."""
    a = _mode_operator(_annihilation(n_max), 0, 2)
    b = _mode_operator(_annihilation(n_max), 1, 2)
    hopping = a @ b.conj().T
    return np.asarray(rate * (hopping + hopping.conj().T) + detuning * (b.conj().T @ b), complex)


@lru_cache(maxsize=64)
def _pulse_eigensystem(
    drive: SidebandDrive, n_max: int, mode_count: int, mode: int
) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = linalg.eigh(pulse_hamiltonian(drive, n_max, mode_count, mode))
    values.flags.writeable = False
    vectors.flags.writeable = False
    return values, vectors


@lru_cache(maxsize=64)
def _exchange_eigensystem(
    rate: float, detuning: float, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = linalg.eigh(exchange_hamiltonian(rate, detuning, n_max))
    values.flags.writeable = False
    vectors.flags.writeable = False
    return values, vectors


def _unitary(values: np.ndarray, vectors: np.ndarray, t: float) -> np.ndarray:
    return np.asarray((vectors * np.exp(-1j * values * t)) @ vectors.conj().T)


def pulse_propagator(
    drive: SidebandDrive, n_max: int, t: float, *, mode_count: int = 1, mode: int = 0
) -> np.ndarray:
    return _unitary(*_pulse_eigensystem(drive, n_max, mode_count, mode), t)


def exchange_propagator(rate: float, detuning: float, n_max: int, t: float) -> np.ndarray:
    return _unitary(*_exchange_eigensystem(rate, detuning, n_max), t)


def _finish(
    state: SpinMotionState, amplitudes: np.ndarray, guard: float
) -> SpinMotionState:
    # Renormalize away round-off only; a unitary never changes the norm by more.
    norm = float(np.vdot(amplitudes, amplitudes).real)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise DomainError(f"propagation changed the norm to {norm:.12f}")
    result = SpinMotionState(
        n_max=state.n_max, mode_count=state.mode_count, amplitudes=amplitudes / math.sqrt(norm)
    )
    check_truncation(result, guard)
    return result


def evolve_pulse(
    state: SpinMotionState,
    drive: SidebandDrive,
    t: float,
    *,
    mode: int = 0,
    guard: float = DEFAULT_GUARD,
) -> SpinMotionState:
    if t < 0:
        raise DomainError("pulse duration must be >= 0")
    if not 0 <= mode < state.mode_count:
        raise DomainError(f"mode {mode} not present in a {state.mode_count}-mode state")
    unitary = pulse_propagator(drive, state.n_max, t, mode_count=state.mode_count, mode=mode)
    return _finish(state, unitary @ state.amplitudes, guard)


@dataclass(frozen=True)
class DoubleWell:
    separation: float
    species_a: Species
    species_b: Species
    omega_a: float
    omega_b: float

    def __post_init__(self) -> None:
        if not self.separation > 0:
            raise DomainError("well separation must be > 0")
        if not self.omega_a > 0 or not self.omega_b > 0:
            raise DomainError("well frequencies must be > 0")

    @property
    def exchange_rate(self) -> float:
        return exchange_rate(self)

    @property
    def detuning(self) -> float:
        return self.omega_b - self.omega_a


def exchange_rate(dw: DoubleWell) -> float:
    """Coefficient of hbar (a b^dag + a^dag b) in the expanded Coulomb energy.

    The cross term of k q_a q_b / |d + z_b - z_a| to second order is
    -2 k q_a q_b z_a z_b / d**3, with z_i = z0_i (a_i + a_i^dag). Falls as 1/d**3.
    """
    coupling = 2.0 * CODATA2018.coulomb_constant * abs(dw.species_a.charge * dw.species_b.charge)
    z0_a = zero_point_extent(dw.species_a, dw.omega_a)
    z0_b = zero_point_extent(dw.species_b, dw.omega_b)
    return coupling / dw.separation**3 * z0_a * z0_b / CODATA2018.hbar


def evolve_exchange(
    state: SpinMotionState,
    dw: DoubleWell,
    detuning: float,
    t: float,
    *,
    guard: float = DEFAULT_GUARD,
) -> SpinMotionState:
    if state.mode_count != 2:
        raise DomainError("exchange needs a two-mode state")
    if t < 0:
        raise DomainError("exchange duration must be >= 0")
    unitary = exchange_propagator(dw.exchange_rate, detuning, state.n_max, t)
    # The spin is a spectator: apply the motional unitary to each spin block.
    blocks = state.amplitudes.reshape(2, -1) @ unitary.T
    return _finish(state, blocks.reshape(-1), guard)


def swap_time(dw: DoubleWell) -> float:
    return math.pi / (2.0 * dw.exchange_rate)


def thermal_state(n_bar: float, n_max: int, *, guard: float = DEFAULT_GUARD) -> np.ndarray:
    """Occupation probabilities p(n) proportional to (n_bar / (1 + n_bar))**n."""
    if n_bar < 0:
        raise DomainError(f"n_bar must be >= 0, got {n_bar}")
    if n_bar == 0:
        probabilities = np.zeros(n_max + 1)
        probabilities[0] = 1.0
        return probabilities
    ratio = n_bar / (1.0 + n_bar)
    weights = ratio ** np.arange(n_max + 1, dtype=float)
    probabilities = weights / weights.sum()
    if probabilities[-1] >= guard:
        raise TruncationError(
            f"thermal n_bar={n_bar} leaves {probabilities[-1]:.3e} in |{n_max}>",
            top_population=float(probabilities[-1]),
        )
    return np.asarray(probabilities)


@dataclass(frozen=True)
class SpinReset:
    """Instantaneous optical-pumping reset of the spin to down."""

    failure_probability: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.failure_probability <= 1.0:
            raise DomainError("reset failure probability must lie in [0, 1]")


def ground_state_cool(
    initial: SpinMotionState | np.ndarray,
    drive: SidebandDrive,
    reset: SpinReset,
    *,
    target: float = 0.01,
    max_pulses: int = 500,
    guard: float = DEFAULT_GUARD,
) -> CoolingOutcome:
    """Alternate red-sideband pi-pulses and spin resets on Fock populations.

    ``initial`` is a one-mode state or an occupation distribution with the
    spin down. Each pulse is timed for the level carrying the largest share of
    the mean occupation; coherences are discarded by the reset.
    """
    if drive.kind != "red_sideband":
        raise DomainError("ground-state cooling needs a red-sideband drive")
    populations = _as_populations(initial)
    n_max = populations.shape[1] - 1
    levels = np.arange(n_max + 1)

    def mean(p: np.ndarray) -> float:
        return float(np.dot(levels, p.sum(axis=0)))

    history = [mean(populations)]
    pulses = 0
    while history[-1] >= target and pulses < max_pulses:
        weights = levels[1:] * populations.sum(axis=0)[1:]
        level = int(np.argmax(weights)) + 1
        unitary = pulse_propagator(drive, n_max, drive.pi_time(level))
        transfer = np.abs(unitary) ** 2
        populations = (transfer @ populations.reshape(-1)).reshape(2, n_max + 1)
        populations[0] += (1.0 - reset.failure_probability) * populations[1]
        populations[1] *= reset.failure_probability
        top = float(populations[:, -1].sum())
        if top >= guard:
            raise TruncationError(
                f"cooling pushed {top:.3e} into |n_max={n_max}>", top_population=top
            )
        pulses += 1
        history.append(mean(populations))

    converged = history[-1] < target
    if not converged:
        logger.info(
            "ground-state cooling stopped at n_bar=%.4g after %d pulses", history[-1], pulses
        )
    return CoolingOutcome(
        final_n_bar=history[-1],
        pulse_count=pulses,
        converged=converged,
        history=tuple(history),
    )


def _as_populations(initial: SpinMotionState | np.ndarray) -> np.ndarray:
    if isinstance(initial, SpinMotionState):
        if initial.mode_count != 1:
            raise DomainError("ground-state cooling acts on a one-mode state")
        return np.asarray(np.abs(initial._tensor()) ** 2, dtype=float)
    distribution = np.asarray(initial, dtype=float)
    if distribution.ndim != 1 or abs(distribution.sum() - 1.0) > NORM_TOLERANCE:
        raise DomainError("occupation distribution must be a normalized 1-D array")
    return np.vstack([distribution, np.zeros_like(distribution)])


@dataclass(frozen=True)
class NoiseChannels:
    heating_rate: float = 0.0
    t2: float = math.inf

    def __post_init__(self) -> None:
        if self.heating_rate < 0:
            raise DomainError("heating rate must be >= 0")
        if not self.t2 > 0:
            raise DomainError("T2 must be > 0")

    @property
    def dephasing_rate(self) -> float:
        return 0.0 if math.isinf(self.t2) else 1.0 / (2.0 * self.t2)

    @property
    def silent(self) -> bool:
        return self.heating_rate == 0 and self.dephasing_rate == 0


def apply_noise(
    state: SpinMotionState,
    channels: NoiseChannels,
    dt: float,
    rng: np.random.Generator,
    *,
    guard: float = DEFAULT_GUARD,
) -> SpinMotionState:
    """One first-order quantum-trajectory step of heating and spin dephasing.

    Heating uses the jump operators sqrt(G) a^dag and sqrt(G) a on every mode
    (net rate G quanta/s); dephasing uses sqrt(1/(2 T2)) sigma_z.
    """
    if dt < 0:
        raise DomainError("noise step must be >= 0")
    if dt == 0 or channels.silent:
        return state
    n_max, modes = state.n_max, state.mode_count
    a_single = _annihilation(n_max)
    identity_spin = np.eye(2)
    jumps: list[np.ndarray] = []
    for mode in range(modes):
        a = np.kron(identity_spin, _mode_operator(a_single, mode, modes))
        jumps.append(math.sqrt(channels.heating_rate) * a.conj().T)
        jumps.append(math.sqrt(channels.heating_rate) * a)
    motional_dim = (n_max + 1) ** modes
    jumps.append(math.sqrt(channels.dephasing_rate) * np.kron(_SIGMA_Z, np.eye(motional_dim)))

    psi = state.amplitudes
    weights = np.array([float(np.linalg.norm(op @ psi) ** 2) for op in jumps]) * dt
    total = float(weights.sum())
    if total > 0.1:
        raise DomainError(f"noise step dt={dt:.3e} too coarse (jump probability {total:.3f})")
    if rng.random() < total:
        chosen = int(rng.choice(len(jumps), p=weights / total))
        psi = jumps[chosen] @ psi
    else:
        decay = sum(op.conj().T @ op for op in jumps)
        psi = np.exp(-0.5 * dt * np.real(np.diag(decay))) * psi
    psi = psi / np.linalg.norm(psi)
    result = SpinMotionState(n_max=n_max, mode_count=modes, amplitudes=psi)
    check_truncation(result, guard)
    return result


@dataclass(frozen=True)
class PopulationSample:
    time: float
    stage: str
    label: str
    population: float


@dataclass
class ReadoutChainResult:
    bright_probability: float
    samples: list[PopulationSample] = field(default_factory=list)


def simulate_readout_chain(
    spin_up: bool,
    particle_drive: SidebandDrive,
    ion_drive: SidebandDrive,
    dw: DoubleWell,
    rng: np.random.Generator,
    *,
    n_max: int = 6,
    noise: NoiseChannels | None = None,
    trajectories: int = 1,
    samples_per_step: int = 20,
    guard: float = DEFAULT_GUARD,
) -> ReadoutChainResult:
    """Spin -> motion -> exchange -> atomic-ion spin transfer, by trajectories.

    Stage one acts on the particle's spin and motion. The particle spin is then
    sampled and traced out, and stage two tracks the ion spin with the two
    coupled motional modes (particle, ion).
    """
    if trajectories < 1 or samples_per_step < 1:
        raise DomainError("trajectories and samples_per_step must be >= 1")
    channels = noise or NoiseChannels()
    t_particle = particle_drive.pi_time(1)
    t_swap = swap_time(dw)
    t_ion = ion_drive.pi_time(1)
    totals: dict[tuple[int, str, str], float] = {}
    times: dict[int, float] = {}
    bright = 0.0

    def record(step: int, time: float, stage: str, state: SpinMotionState) -> None:
        times[step] = time
        for index, population in enumerate(state.populations()):
            if population > 1e-12:
                key = (step, stage, state.label(index))
                totals[key] = totals.get(key, 0.0) + float(population)

    for _ in range(trajectories):
        step = 0
        clock = 0.0
        single = SpinMotionState.fock(spin_up, [0], n_max)
        record(step, clock, "particle", single)
        dt = t_particle / samples_per_step
        for _ in range(samples_per_step):
            single = evolve_pulse(single, particle_drive, dt, guard=guard)
            single = apply_noise(single, channels, dt, rng, guard=guard)
            clock += dt
            step += 1
            record(step, clock, "particle", single)

        tensor = single.amplitudes.reshape(2, n_max + 1)
        p_up = float(np.sum(np.abs(tensor[1]) ** 2))
        motion = tensor[1] if rng.random() < p_up else tensor[0]
        motion = motion / np.linalg.norm(motion)
        ground = np.zeros(n_max + 1)
        ground[0] = 1.0
        pair = SpinMotionState.from_motion(False, np.kron(motion, ground), n_max, 2)
        record(step, clock, "pair", pair)

        dt = t_swap / samples_per_step
        for _ in range(samples_per_step):
            pair = evolve_exchange(pair, dw, dw.detuning, dt, guard=guard)
            pair = apply_noise(pair, channels, dt, rng, guard=guard)
            clock += dt
            step += 1
            record(step, clock, "pair", pair)

        dt = t_ion / samples_per_step
        for _ in range(samples_per_step):
            pair = evolve_pulse(pair, ion_drive, dt, mode=1, guard=guard)
            pair = apply_noise(pair, channels, dt, rng, guard=guard)
            clock += dt
            step += 1
            record(step, clock, "pair", pair)
        bright += pair.spin_up_probability()

    samples = [
        PopulationSample(times[step], stage, label, total / trajectories)
        for (step, stage, label), total in sorted(totals.items())
    ]
    return ReadoutChainResult(bright_probability=bright / trajectories, samples=samples)
