from __future__ import annotations

from collections.abc import Mapping
from types import MappingProxyType

from .constants import CODATA2018
from .errors import DomainError
from .models import Species

# Bound-electron g_J of the 9Be+ ground state; the qubit moment is g_J*mu_B/2.
BE9_G_J = 2.00226206
BE9_MASS = 9.0121830650 * CODATA2018.atomic_mass_unit - CODATA2018.electron_mass

PROTON = Species.from_g(
    "proton",
    CODATA2018.elementary_charge,
    CODATA2018.proton_mass,
    CODATA2018.proton_g_factor,
)
ANTIPROTON = Species.from_g(
    "antiproton",
    -CODATA2018.elementary_charge,
    CODATA2018.proton_mass,
    CODATA2018.proton_g_factor,
)
BE9 = Species.from_moment(
    "be9",
    CODATA2018.elementary_charge,
    BE9_MASS,
    BE9_G_J * CODATA2018.bohr_magneton / 2.0,
)

BUILTIN_SPECIES: Mapping[str, Species] = MappingProxyType(
    {species.name: species for species in (PROTON, ANTIPROTON, BE9)}
)


def _require_field(B: float) -> None:
    if not B > 0:
        raise DomainError(f"magnetic field must be > 0, got {B}")


def larmor_frequency(s: Species, B: float) -> float:
    """Spin precession frequency (g/2)(|q|/m)B in rad/s."""
    _require_field(B)
    return abs(s.g_factor) / 2.0 * s.charge_to_mass * B


def free_cyclotron_frequency(s: Species, B: float) -> float:
    _require_field(B)
    return s.charge_to_mass * B


def g_from_frequencies(omega_L: float, omega_C: float) -> float:
    if not omega_L > 0 or not omega_C > 0:
        raise DomainError(
            f"frequencies must be > 0, got omega_L={omega_L}, omega_C={omega_C}"
        )
    return 2.0 * omega_L / omega_C


def cpt_ratio(g_particle: float, g_antiparticle: float) -> float:
    """Fractional difference g_particle/g_antiparticle - 1."""
    if g_antiparticle == 0:
        raise DomainError("antiparticle g_factor must be non-zero")
    return g_particle / g_antiparticle - 1.0
