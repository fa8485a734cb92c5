"""Physical constants (SI) and fixed unit-conversion factors.

Couplings are handed around in ordinary frequency (Hz); the rad/s -> Hz
division by 2*pi happens here and nowhere else.
"""

import math

TWO_PI = 2.0 * math.pi

HBAR = 1.054571817e-34          # J s (CODATA 2018)
MU0 = 4.0e-7 * math.pi          # N A^-2
MU0_OVER_4PI = 1.0e-7           # N A^-2

# Gyromagnetic ratio magnitudes, rad s^-1 T^-1.  29Si actually has a negative
# moment; only products of two ratios enter the couplings used here, so the
# magnitudes are stored and signs are left to the configuration if ever needed.
GAMMA_E = 1.76085963023e11      # free electron (CODATA)
GAMMA_N_SI29 = 5.3190e7         # 29Si (|gamma|/2pi = 8.465 MHz/T)

ANGSTROM = 1.0e-10              # m

# Dipolar prefactor in Hz * Angstrom^3 for two moments with ratios gi, gj:
#   C(r) = DIPOLAR_HZ_A3(gi, gj) * (1 - 3 cos^2 theta) / r_A^3


def dipolar_prefactor_hz_a3(gamma_i: float, gamma_j: float) -> float:
    """(mu0/4pi) gi gj hbar / 2pi, converted so r may be given in Angstrom."""
    return MU0_OVER_4PI * gamma_i * gamma_j * HBAR / TWO_PI / ANGSTROM**3
