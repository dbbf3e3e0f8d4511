"""Dipole-phonon coupling of a planar rotor to the crystal's normal modes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .constants import AMU, DEBYE, E_CHARGE, HBAR, TWO_PI
from .crystal import ModeSet, NormalMode
from .errors import ValidationError

FORMS = ("cos", "sin")


@dataclass(frozen=True)
class RotorProperties:
    """Internal properties of the rotor.

    Parameters
    ----------
    mu : float
        Body-frame dipole moment, C m.
    b_hz : float, optional
        Rotational constant B as energy/h, Hz. Takes precedence over the
        sphere model.
    sphere_radius : float, optional
        Radius (m) of a uniform solid sphere used to derive B from the
        rotor mass when ``b_hz`` is not given.
    """

    mu: float
    b_hz: Optional[float] = None
    sphere_radius: Optional[float] = None

    def __post_init__(self):
        problems = []
        if not self.mu >= 0:
            problems.append(f"dipole moment must be >= 0, got {self.mu!r}")
        if self.b_hz is None and self.sphere_radius is None:
            problems.append("either b_hz or sphere_radius is required")
        if self.b_hz is not None and not self.b_hz > 0:
            problems.append(f"b_hz must be positive, got {self.b_hz!r}")
        if self.sphere_radius is not None and not self.sphere_radius > 0:
            problems.append(f"sphere_radius must be positive, got {self.sphere_radius!r}")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @classmethod
    def from_debye(cls, mu_debye, b_hz=None, sphere_radius=None):
        return cls(mu_debye * DEBYE, b_hz, sphere_radius)

    @property
    def mu_debye(self) -> float:
        return self.mu / DEBYE

    def rotational_constant(self, rotor_mass) -> float:
        """B in Hz; ``rotor_mass`` (u) is only used by the sphere model."""
        if self.b_hz is not None:
            return self.b_hz
        return rotational_constant_sphere(rotor_mass, self.sphere_radius)


@dataclass(frozen=True)
class ModeCoupling:
    """Field scale ``E0`` (V/m) and coupling rate ``g`` (rad/s) for one mode."""

    mode: NormalMode
    E0: float
    g: float
    name: str = ""

    @property
    def g_hz(self) -> float:
        """|g|/2pi in Hz; the sign only reflects the eigenvector convention."""
        return abs(self.g) / TWO_PI

    @property
    def omega(self) -> float:
        return self.mode.omega


def field_scale(mode: NormalMode, rotor_mass, rotor_index) -> float:
    """E0 = b_rot * sqrt(hbar omega^3 M_rot / (2 e^2)), in V/m.

    ``rotor_mass`` in u. The sign follows the eigenvector sign convention.
    """
    b_rot = mode.b[rotor_index]
    if b_rot == 0.0:
        return 0.0
    m = rotor_mass * AMU
    return b_rot * math.sqrt(HBAR * mode.omega**3 * m / (2.0 * E_CHARGE**2))


def coupling_rate(E0, mu) -> float:
    """g = mu E0 / (2 hbar) in rad/s (mu in C m, E0 in V/m)."""
    if mu < 0:
        raise ValidationError(f"dipole moment must be >= 0, got {mu!r}")
    return mu * E0 / (2.0 * HBAR)


def rotational_constant_sphere(mass, radius) -> float:
    """B (Hz) of a uniform solid sphere, I = (2/5) m r^2, B = hbar / (4 pi I).

    ``mass`` in u, ``radius`` in m.
    """
    if not (mass > 0 and radius > 0):
        raise ValidationError("sphere mass and radius must be positive")
    inertia = 0.4 * mass * AMU * radius**2
    return HBAR / (2.0 * TWO_PI * inertia)


def rotor_matrix_element(l, l_prime, form) -> complex:
    """<l'| cos(phi) |l> or <l'| sin(phi) |l> in the planar-rotor basis e^{i l phi}."""
    if form not in FORMS:
        raise ValidationError(f"form must be one of {FORMS}, got {form!r}")
    d = l_prime - l
    if abs(d) != 1:
        return 0j
    if form == "cos":
        return 0.5 + 0j
    # sin = (e^{i phi} - e^{-i phi}) / 2i
    return 1.0 / 2j if d == 1 else -1.0 / 2j


def form_for(mode: NormalMode) -> str:
    """Axial modes couple through cos(phi), radial modes through sin(phi)."""
    return "cos" if mode.direction == "axial" else "sin"


def mode_couplings(modes: ModeSet, rotor_mass, mu) -> tuple:
    """ModeCoupling for every mode of ``modes`` (axial first, then radial)."""
    out = []
    for name, mode in zip(modes.names, modes):
        e0 = field_scale(mode, rotor_mass, modes.rotor_index)
        out.append(ModeCoupling(mode, e0, coupling_rate(e0, mu), name))
    return tuple(out)
