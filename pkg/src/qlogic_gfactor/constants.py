from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Constants:
    """CODATA-2018 reference values (SI)."""

    hbar: float = 1.054571817e-34
    epsilon0: float = 8.8541878128e-12
    k_boltzmann: float = 1.380649e-23
    elementary_charge: float = 1.602176634e-19
    proton_mass: float = 1.67262192369e-27
    electron_mass: float = 9.1093837015e-31
    atomic_mass_unit: float = 1.66053906660e-27
    bohr_magneton: float = 9.2740100783e-24
    proton_g_factor: float = 5.5856946893

    @property
    def coulomb_constant(self) -> float:
        return 1.0 / (4.0 * math.pi * self.epsilon0)


CODATA2018 = Constants()
