"""Physical constants (CODATA 2018, SI)."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = 6.62607015e-34
    e: float = 1.602176634e-19
    k_B: float = 1.380649e-23

    @property
    def hbar(self) -> float:
        return self.h / (2.0 * math.pi)

    @property
    def Phi0(self) -> float:
        return self.h / (2.0 * self.e)

    @property
    def phi0_reduced(self) -> float:
        """hbar / 2e, the reduced flux quantum."""
        return self.hbar / (2.0 * self.e)


CONST = PhysicalConstants()

h = CONST.h
hbar = CONST.hbar
e = CONST.e
k_B = CONST.k_B
Phi0 = CONST.Phi0
PHI0_REDUCED = CONST.phi0_reduced
