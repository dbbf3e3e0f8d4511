"""Physical constants (SI) used throughout the package.

Values are pinned rather than taken from ``scipy.constants`` so that results
do not drift with CODATA revisions.
"""

import math

AMU = 1.66053906660e-27  # kg
E_CHARGE = 1.602176634e-19  # C
HBAR = 1.054571817e-34  # J s
H_PLANCK = 2.0 * math.pi * HBAR
COULOMB_K = 8.9875517923e9  # 1/(4 pi eps0), N m^2 / C^2
DEBYE = 3.33564e-30  # C m
ANGSTROM = 1e-10  # m

# Coulomb prefactor for two unit charges, e^2/(4 pi eps0)
COULOMB_C = COULOMB_K * E_CHARGE**2

TWO_PI = 2.0 * math.pi
