"""Penning-trap eigenfrequencies and magnetic-bottle shifts.

The electrostatic potential of a zone is

    Phi = (V0 * c2 / d_char**2) * (z**2 - (1 + e) x**2 / 2 - (1 - e) y**2 / 2)

in trap coordinates, with ``e`` the ellipticity. The magnetic field has
magnitude B0 and is tilted by ``tilt_theta`` from the trap axis in the x-z
plane. With the default ``c2 = 1/2`` this gives omega_z**2 = |q| V0 / (m d**2).
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .constants import CODATA2018
from .errors import DomainError, UnstableTrapError
from .models import ModeFrequencies, Species, TrapZone
from .species import free_cyclotron_frequency

logger = logging.getLogger(__name__)

_INSTABILITY_TOLERANCE = 1e-9
_DEGENERACY_TOLERANCE = 1e-9
_NEWTON_STEPS = 3


def axial_frequency(s: Species, z: TrapZone) -> float:
    return math.sqrt(2.0 * s.charge_to_mass * z.V0 * z.c2) / z.d_char


def cyclotron_from_modes(omega_plus: float, omega_minus: float, omega_z: float) -> float:
    """Free cyclotron frequency recombined by the invariance theorem."""
    return math.sqrt(omega_plus**2 + omega_minus**2 + omega_z**2)


def ideal_modes(s: Species, z: TrapZone) -> ModeFrequencies:
    if not z.is_ideal:
        raise DomainError(f"zone {z.name}: ideal_modes requires tilt_theta = ellipticity = 0")
    omega_c = free_cyclotron_frequency(s, z.B0)
    omega_z = axial_frequency(s, z)
    radicand = omega_c**2 / 4.0 - omega_z**2 / 2.0
    if radicand <= 0:
        raise UnstableTrapError(
            f"zone {z.name}: unstable for {s.name} (omega_c^2 <= 2 omega_z^2)",
            frequencies=(omega_c, omega_z),
        )
    omega_plus = omega_c / 2.0 + math.sqrt(radicand)
    # Product form avoids cancellation: omega_plus * omega_minus = omega_z**2 / 2.
    omega_minus = omega_z**2 / (2.0 * omega_plus)
    return ModeFrequencies(
        omega_plus=omega_plus, omega_minus=omega_minus, omega_z=omega_z, omega_c_free=omega_c
    )


def _cross_matrix(b: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -b[2], b[1]],
            [b[2], 0.0, -b[0]],
            [-b[1], b[0], 0.0],
        ]
    )


def _dimensionless_system(s: Species, z: TrapZone) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness matrix and field-direction cross matrix in units of omega_c."""
    omega_c = free_cyclotron_frequency(s, z.B0)
    k_z = (axial_frequency(s, z) / omega_c) ** 2
    e = z.ellipticity
    stiffness = k_z * np.diag([-(1.0 + e) / 2.0, -(1.0 - e) / 2.0, 1.0])
    b = np.array([math.sin(z.tilt_theta), 0.0, math.cos(z.tilt_theta)])
    return stiffness, _cross_matrix(b)


def _polish(omega: float, stiffness: np.ndarray, cross: np.ndarray) -> float:
    # Newton on log det(-w^2 I + i w [b]x + K); the pencil is Hermitian for real w.
    identity = np.eye(3)
    for _ in range(_NEWTON_STEPS):
        pencil = -(omega**2) * identity + 1j * omega * cross + stiffness
        derivative = -2.0 * omega * identity + 1j * cross
        try:
            slope = float(np.trace(np.linalg.solve(pencil, derivative)).real)
        except np.linalg.LinAlgError:
            break
        if slope == 0.0 or not math.isfinite(slope):
            break
        step = 1.0 / slope
        if abs(step) > 1e-6 * max(omega, 1e-12):
            break
        omega -= step
    return omega


def perturbed_modes(s: Species, z: TrapZone) -> ModeFrequencies:
    """Eigenfrequencies of the linearized motion in a tilted, elliptic trap."""
    omega_c = free_cyclotron_frequency(s, z.B0)
    stiffness, cross = _dimensionless_system(s, z)
    system = np.block([[np.zeros((3, 3)), np.eye(3)], [-stiffness, -cross]])
    try:
        eigenvalues = np.linalg.eigvals(system)
    except np.linalg.LinAlgError as exc:
        raise UnstableTrapError(f"zone {z.name}: eigen-solve failed: {exc}") from exc

    if np.max(np.abs(eigenvalues.real)) > _INSTABILITY_TOLERANCE:
        raise UnstableTrapError(
            f"zone {z.name}: unstable for {s.name} (non-real mode frequency)",
            frequencies=tuple(complex(v) * omega_c for v in eigenvalues),
        )
    positive = sorted((float(v.imag) for v in eigenvalues if v.imag > 0), reverse=True)
    if len(positive) != 3:
        raise UnstableTrapError(
            f"zone {z.name}: expected three positive eigenfrequencies, got {len(positive)}",
            frequencies=tuple(complex(v) * omega_c for v in eigenvalues),
        )
    polished = [_polish(w, stiffness, cross) for w in positive]
    gaps = [polished[i] - polished[i + 1] for i in range(2)]
    if min(gaps) <= _DEGENERACY_TOLERANCE or polished[2] <= 0:
        raise UnstableTrapError(
            f"zone {z.name}: degenerate modes at the stability boundary",
            frequencies=tuple(w * omega_c for w in polished),
        )
    omega_plus, omega_z, omega_minus = (w * omega_c for w in polished)
    logger.debug(
        "zone %s modes: plus=%.9e z=%.9e minus=%.9e", z.name, omega_plus, omega_z, omega_minus
    )
    return ModeFrequencies(
        omega_plus=omega_plus, omega_minus=omega_minus, omega_z=omega_z, omega_c_free=omega_c
    )


def bottle_axial_shift(mu_eff: float, z: TrapZone, s: Species, modes: ModeFrequencies) -> float:
    """Exact axial shift sqrt(omega_z^2 + 2 mu B2 / m) - omega_z.

    To first order this is mu_eff * B2 / (m * omega_z): the continuous
    Stern-Gerlach signal scales as mu/m.
    """
    if not modes.omega_z > 0:
        raise DomainError("omega_z must be > 0")
    delta = 2.0 * mu_eff * z.B2 / s.mass
    radicand = modes.omega_z**2 + delta
    if radicand <= 0:
        raise DomainError(f"zone {z.name}: magnetic bottle overwhelms axial confinement")
    return delta / (math.sqrt(radicand) + modes.omega_z)


def first_order_bottle_shift(
    mu_eff: float, z: TrapZone, s: Species, modes: ModeFrequencies
) -> float:
    return mu_eff * z.B2 / (s.mass * modes.omega_z)


def effective_moment(s: Species, spin_up: bool, n_plus: int, modes: ModeFrequencies) -> float:
    """Spin moment plus the orbital moment of the modified-cyclotron motion."""
    if n_plus < 0:
        raise DomainError(f"n_plus must be >= 0, got {n_plus}")
    spin = s.spin_moment if spin_up else -s.spin_moment
    orbital = (
        (n_plus + 0.5)
        * CODATA2018.hbar
        * abs(s.charge)
        * modes.omega_plus
        / (s.mass * modes.omega_c_free)
    )
    return spin + orbital
