"""Equilibrium and normal modes of a linear crystal of trapped charges.

All particles sit on the trap axis z. The axial confinement is the static
(DC) potential, shared per unit charge; the radial confinement is set by
``TrapConfig.radial_scaling``. Frequencies passed in by the user are
ordinary frequencies in Hz; everything internal is SI with angular
frequencies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import AMU, COULOMB_C, TWO_PI
from .errors import (
    ConvergenceError,
    InstabilityError,
    NonEquilibriumWarning,
    ValidationError,
)

KINDS = ("atom", "rotor")
DIRECTIONS = ("axial", "radial")
RADIAL_SCALINGS = ("uniform", "pseudopotential")
LABELS = ("com", "breathing", "egyptian", "rocking", "zigzag", "unlabeled")

_NEWTON_TOL = 1e-9
_NEWTON_MAXITER = 200
_EQUILIBRIUM_WARN = 1e-6
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ParticleSpec:
    """One trapped particle: mass in u, charge in units of e."""

    mass: float
    charge: int = 1
    kind: str = "atom"

    def __post_init__(self):
        problems = []
        if not (self.mass > 0 and math.isfinite(self.mass)):
            problems.append(f"mass must be positive, got {self.mass!r}")
        if int(self.charge) != self.charge or self.charge < 1:
            problems.append(f"charge must be an integer >= 1, got {self.charge!r}")
        if self.kind not in KINDS:
            problems.append(f"kind must be one of {KINDS}, got {self.kind!r}")
        if problems:
            raise ValidationError("; ".join(problems), problems)


@dataclass(frozen=True)
class TrapConfig:
    """Trap frequencies (Hz) of the reference atomic ion."""

    nu_z: float
    nu_y: float
    radial_scaling: str = "uniform"

    def __post_init__(self):
        problems = []
        if not self.nu_z > 0:
            problems.append(f"nu_z must be positive, got {self.nu_z!r}")
        if not self.nu_y > self.nu_z:
            problems.append(f"nu_y must exceed nu_z, got nu_y={self.nu_y!r}, nu_z={self.nu_z!r}")
        if self.radial_scaling not in RADIAL_SCALINGS:
            problems.append(f"radial_scaling must be one of {RADIAL_SCALINGS}")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @property
    def omega_z(self) -> float:
        return TWO_PI * self.nu_z

    @property
    def omega_y(self) -> float:
        return TWO_PI * self.nu_y


@dataclass(frozen=True)
class CrystalConfig:
    """Ordered chain of particles (left to right along z) in a trap."""

    particles: tuple
    trap: TrapConfig

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        problems = []
        if len(self.particles) < 2:
            problems.append("a crystal needs at least two particles")
        n_rot = sum(p.kind == "rotor" for p in self.particles)
        if n_rot != 1:
            problems.append(f"exactly one rotor required, found {n_rot}")
        if not any(p.kind == "atom" for p in self.particles):
            problems.append("at least one atomic ion is required as reference")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @classmethod
    def linear(cls, atom_mass, rotor_mass, trap, atom_charge=1, rotor_charge=1,
               count_per_side=1):
        """Rotor at the centre with ``count_per_side`` identical atoms on each side."""
        atom = ParticleSpec(atom_mass, atom_charge, "atom")
        rotor = ParticleSpec(rotor_mass, rotor_charge, "rotor")
        side = (atom,) * count_per_side
        return cls(side + (rotor,) + side, trap)

    @property
    def n(self) -> int:
        return len(self.particles)

    @property
    def rotor_index(self) -> int:
        return next(i for i, p in enumerate(self.particles) if p.kind == "rotor")

    @property
    def reference(self) -> ParticleSpec:
        return next(p for p in self.particles if p.kind == "atom")

    @property
    def rotor(self) -> ParticleSpec:
        return self.particles[self.rotor_index]

    @property
    def masses(self) -> np.ndarray:
        """Masses in kg."""
        return np.array([p.mass for p in self.particles]) * AMU

    @property
    def charges(self) -> np.ndarray:
        return np.array([float(p.charge) for p in self.particles])

    @property
    def is_mirror_symmetric(self) -> bool:
        ps = self.particles
        return all(
            (a.mass, a.charge) == (b.mass, b.charge) for a, b in zip(ps, reversed(ps))
        )

    @property
    def kappa_z(self) -> np.ndarray:
        """Axial spring constants (N/m), proportional to charge."""
        ref = self.reference
        return self.charges / ref.charge * ref.mass * AMU * self.trap.omega_z**2

    @property
    def kappa_y(self) -> np.ndarray:
        """Radial spring constants (N/m) per ``trap.radial_scaling``."""
        ref = self.reference
        base = ref.mass * AMU * self.trap.omega_y**2
        q = self.charges / ref.charge
        if self.trap.radial_scaling == "uniform":
            return q * base
        m = np.array([p.mass for p in self.particles])
        return q**2 * (ref.mass / m) * base

    @property
    def length_scale(self) -> float:
        """l = (C / kappa_ref)^(1/3) in metres."""
        ref = self.reference
        return (COULOMB_C * ref.charge**2 / (ref.mass * AMU * self.trap.omega_z**2)) ** (1.0 / 3.0)

    def with_rotor_mass(self, mass):
        ps = list(self.particles)
        ps[self.rotor_index] = replace(ps[self.rotor_index], mass=mass)
        return replace(self, particles=tuple(ps))

    def with_trap(self, **changes):
        return replace(self, trap=replace(self.trap, **changes))


@dataclass(frozen=True)
class EquilibriumResult:
    positions: np.ndarray = field(repr=False)
    length_scale: float
    residual: float
    iterations: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class NormalMode:
    """A single normal mode.

    ``b`` is the unit-norm, mass-weighted eigenvector; ``omega`` is angular
    (rad/s).
    """

    direction: str
    omega: float
    b: tuple
    label: str = "unlabeled"
    parity: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))

    @property
    def nu(self) -> float:
        return self.omega / TWO_PI

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def name(self) -> str:
        return f"{self.direction}_{self.label}"


@dataclass(frozen=True)
class ModeSet:
    """Axial and radial modes, each sorted by ascending frequency."""

    axial: tuple
    radial: tuple
    rotor_index: int
    positions: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "axial", tuple(self.axial))
        object.__setattr__(self, "radial", tuple(self.radial))
        if self.positions is not None:
            object.__setattr__(self, "positions", tuple(float(z) for z in self.positions))

    def __iter__(self):
        return iter(self.axial + self.radial)

    def __len__(self):
        return len(self.axial) + len(self.radial)

    def direction(self, direction):
        if direction not in DIRECTIONS:
            raise ValidationError(f"unknown direction {direction!r}")
        return self.axial if direction == "axial" else self.radial

    @property
    def names(self) -> list:
        """Unique mode names: ``<direction>_<label>``, or index-based if labels repeat."""
        out = []
        for direction in DIRECTIONS:
            modes = self.direction(direction)
            labels = [m.label for m in modes]
            if "unlabeled" in labels or len(set(labels)) != len(labels):
                out.extend(f"{direction}_{k}" for k in range(len(modes)))
            else:
                out.extend(m.name for m in modes)
        return out

    def by_name(self, name) -> NormalMode:
        for mode_name, mode in zip(self.names, self):
            if mode_name == name:
                return mode
        raise ValidationError(f"no mode named {name!r}; available: {', '.join(self.names)}")


def _pair_terms(z, charges):
    dz = z[:, None] - z[None, :]
    qq = charges[:, None] * charges[None, :]
    np.fill_diagonal(dz, np.inf)
    return dz, qq


def trap_potential(positions, kappa, charges) -> float:
    """Harmonic trap plus Coulomb energy (J) of charges on a line."""
    z = np.asarray(positions, dtype=float)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), z.shape)
    charges = np.broadcast_to(np.asarray(charges, dtype=float), z.shape)
    if z.size > 1 and np.min(np.diff(np.sort(z))) <= 0.0:
        raise ValidationError("coincident positions: Coulomb energy is singular")
    energy = 0.5 * float(np.sum(kappa * z**2))
    for i in range(z.size):
        for j in range(i + 1, z.size):
            energy += COULOMB_C * charges[i] * charges[j] / abs(z[i] - z[j])
    return energy


def potential_energy(config: CrystalConfig, positions) -> float:
    """Total axial potential energy (J) at the given positions (m)."""
    z = np.asarray(positions, dtype=float)
    if z.shape != (config.n,):
        raise ValidationError(f"expected {config.n} positions, got shape {z.shape}")
    return trap_potential(z, config.kappa_z, config.charges)


def _forces(z, kappa, charges):
    dz, qq = _pair_terms(z, charges)
    coul = COULOMB_C * qq * np.sign(dz) / dz**2
    return -kappa * z + coul.sum(axis=1)


def _axial_stiffness(z, kappa, charges):
    dz, qq = _pair_terms(z, charges)
    c = 2.0 * COULOMB_C * qq / np.abs(dz) ** 3
    k = -c
    np.fill_diagonal(k, kappa + c.sum(axis=1))
    return k


def _mirror(z):
    return 0.5 * (z - z[::-1])


def equilibrium_positions(config: CrystalConfig, tol=_NEWTON_TOL, max_iter=_NEWTON_MAXITER):
    """Solve the axial force balance with a damped Newton iteration.

    Works in units of the length scale l and force scale C/l^2. Converges
    when max |force| < ``tol`` * C/l^2.
    """
    ell = config.length_scale
    kref = COULOMB_C / ell**3
    kappa = config.kappa_z / kref
    q = config.charges
    n = config.n
    symmetric = config.is_mirror_symmetric

    # dimensionless: C -> 1, lengths in l
    def force(x):
        dz, qq = _pair_terms(x, q)
        return -kappa * x + (qq * np.sign(dz) / dz**2).sum(axis=1)

    def stiffness(x):
        dz, qq = _pair_terms(x, q)
        c = 2.0 * qq / np.abs(dz) ** 3
        k = -c
        np.fill_diagonal(k, kappa + c.sum(axis=1))
        return k

    spacing = (5.0 / 4.0) ** (1.0 / 3.0) * (3.0 / n) ** 0.56
    x = (np.arange(n) - 0.5 * (n - 1)) * spacing
    f = force(x)
    res = float(np.max(np.abs(f)))
    it = 0
    while res >= tol and it < max_iter:
        it += 1
        step = np.linalg.solve(stiffness(x), f)
        alpha = 1.0
        while alpha > 1e-8:
            trial = x + alpha * step
            if symmetric:
                trial = _mirror(trial)
            if np.all(np.diff(trial) > 0):
                f_trial = force(trial)
                r_trial = float(np.max(np.abs(f_trial)))
                if r_trial < res or alpha < 1e-4:
                    break
            alpha *= 0.5
        else:
            raise ConvergenceError("line search failed to keep the chain ordered", res * COULOMB_C / ell**2)
        x, f, res = trial, f_trial, r_trial
    if res >= tol:
        raise ConvergenceError(
            f"equilibrium not converged after {it} iterations (max |F| = {res:.3e} C/l^2)",
            res * COULOMB_C / ell**2,
        )
    return EquilibriumResult(x * ell, ell, res * COULOMB_C / ell**2, it)


def hessian(config: CrystalConfig, positions, direction: str) -> np.ndarray:
    """Mass-weighted curvature matrix A_ij = K_ij / sqrt(m_i m_j) in 1/s^2.

    Emits ``NonEquilibriumWarning`` if ``positions`` is not a force-free
    configuration; the matrix is still returned.
    """
    z = np.asarray(positions, dtype=float)
    if direction not in DIRECTIONS:
        raise ValidationError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    q = config.charges
    ell = config.length_scale
    resid = float(np.max(np.abs(_forces(z, config.kappa_z, q))))
    if resid > _EQUILIBRIUM_WARN * COULOMB_C / ell**2:
        warnings.warn(
            f"positions are not an equilibrium (max |F| = {resid:.3e} N)",
            NonEquilibriumWarning,
            stacklevel=2,
        )
    if direction == "axial":
        k = _axial_stiffness(z, config.kappa_z, q)
    else:
        dz, qq = _pair_terms(z, q)
        c = COULOMB_C * qq / np.abs(dz) ** 3
        k = c.copy()
        np.fill_diagonal(k, config.kappa_y - c.sum(axis=1))
    m = config.masses
    return k / np.sqrt(np.outer(m, m))


def _parity_basis(n):
    """Orthonormal even/odd bases under z -> -z for an n-site chain."""
    half = n // 2
    even, odd = [], []
    s = 1.0 / math.sqrt(2.0)
    for i in range(half):
        e = np.zeros(n)
        o = np.zeros(n)
        e[i] = e[n - 1 - i] = s
        o[i], o[n - 1 - i] = s, -s
        even.append(e)
        odd.append(o)
    if n % 2:
        e = np.zeros(n)
        e[half] = 1.0
        even.append(e)
    return np.array(even).T, np.array(odd).T


def _fix_sign(v):
    a = np.abs(v)
    top = a.max()
    k = int(np.flatnonzero(a >= top * (1.0 - _TIE_RTOL))[0])
    return -v if v[k] < 0 else v


def _diagonalize(a, symmetric):
    """Eigenpairs sorted ascending, with parity tags when the chain is symmetric."""
    a = 0.5 * (a + a.T)
    if not symmetric:
        w, v = np.linalg.eigh(a)
        return w, v.T, [None] * len(w)
    pe, po = _parity_basis(a.shape[0])
    vals, vecs, tags = [], [], []
    for basis, tag in ((pe, "even"), (po, "odd")):
        if basis.size == 0:
            continue
        block = basis.T @ a @ basis
        w, u = np.linalg.eigh(0.5 * (block + block.T))
        vals.extend(w)
        vecs.extend((basis @ u).T)
        tags.extend([tag] * len(w))
    order = np.argsort(vals, kind="stable")
    return np.array(vals)[order], np.array(vecs)[order], [tags[i] for i in order]


def _modes_for(config, positions, direction):
    a = hessian(config, positions, direction)
    w, vecs, tags = _diagonalize(a, config.is_mirror_symmetric)
    if w[0] <= 0.0:
        kind = "zigzag" if direction == "radial" else "axial"
        raise InstabilityError(
            f"{direction} Hessian has a non-positive eigenvalue {w[0]:.3e} s^-2 "
            f"({kind} instability of the linear chain)",
            direction,
        )
    return tuple(
        NormalMode(direction, math.sqrt(lam), _fix_sign(v), parity=tag)
        for lam, v, tag in zip(w, vecs, tags)
    )


def normal_modes(config: CrystalConfig, equilibrium: Optional[EquilibriumResult] = None) -> ModeSet:
    """Axial and radial normal modes, labelled where the geometry allows.

    Raises ``InstabilityError`` naming the direction if any curvature is
    non-positive.
    """
    if equilibrium is None:
        equilibrium = equilibrium_positions(config)
    z = equilibrium.positions
    modes = ModeSet(
        _modes_for(config, z, "axial"),
        _modes_for(config, z, "radial"),
        config.rotor_index,
        tuple(z),
    )
    return classify_modes(modes, config)


def _parity_of(b, atol=1e-9):
    v = np.asarray(b)
    if np.allclose(v, v[::-1], atol=atol):
        return "even"
    if np.allclose(v, -v[::-1], atol=atol):
        return "odd"
    return None


def _label(mode, tol=1e-12):
    parity = mode.parity or _parity_of(mode.b)
    b = mode.b
    if parity == "odd":
        return "breathing" if mode.direction == "axial" else "rocking"
    if parity != "even" or abs(b[1]) <= tol or abs(b[0]) <= tol:
        return "unlabeled"
    if math.copysign(1.0, b[0]) == math.copysign(1.0, b[1]):
        return "com"
    return "egyptian" if mode.direction == "axial" else "zigzag"


def classify_modes(modes: ModeSet, config: CrystalConfig) -> ModeSet:
    """Attach com/breathing/egyptian (axial) and com/rocking/zigzag (radial) labels.

    Only defined for a mirror-symmetric three-particle crystal with the
    rotor in the middle; any other geometry gets ``unlabeled``.
    """
    ok = config.n == 3 and config.is_mirror_symmetric and config.rotor_index == 1

    def relabel(mode):
        label = _label(mode) if ok else "unlabeled"
        parity = mode.parity or (_parity_of(mode.b) if config.is_mirror_symmetric else None)
        return replace(mode, label=label, parity=parity)

    return replace(
        modes,
        axial=tuple(relabel(m) for m in modes.axial),
        radial=tuple(relabel(m) for m in modes.radial),
    )


@dataclass(frozen=True)
class BranchTracking:
    """Branch assignment along a scan.

    ``order[k][j]`` is the position (in ``iter(ModeSet)`` order) of branch
    ``branches[j]`` at step ``k``; ``None`` for failed steps.
    """

    branches: tuple
    order: tuple
    min_overlap: tuple
    ambiguous: tuple

    @property
    def any_ambiguous(self) -> bool:
        return any(self.ambiguous)


AMBIGUITY_THRESHOLD = 1.0 / math.sqrt(2.0)


def track_branches(modesets: Sequence[Optional[ModeSet]]) -> BranchTracking:
    """Follow modes along a scan by maximal eigenvector overlap.

    Each step is matched against the previous valid step, per direction,
    with an optimal assignment so the result is always a permutation. A
    step whose matched overlap falls below 1/sqrt(2) is flagged ambiguous.
    """
    first = next((m for m in modesets if m is not None), None)
    if first is None:
        return BranchTracking((), tuple(None for _ in modesets), tuple(math.nan for _ in modesets),
                              tuple(False for _ in modesets))
    branches = tuple(first.names)
    n_ax = len(first.axial)
    prev = None
    prev_order = None
    orders, overlaps, flags = [], [], []
    for ms in modesets:
        if ms is None:
            orders.append(None)
            overlaps.append(math.nan)
            flags.append(False)
            continue
        if len(ms.axial) != n_ax or len(ms.radial) != len(first.radial):
            raise ValidationError("all ModeSets in a scan must have the same size")
        if prev is None:
            order = list(range(len(ms)))
            worst = 1.0
        else:
            order = [0] * len(ms)
            worst = 1.0
            for direction, offset in (("axial", 0), ("radial", n_ax)):
                old = np.array([m.b for m in prev.direction(direction)])
                new = np.array([m.b for m in ms.direction(direction)])
                ov = np.abs(old @ new.T)
                rows, cols = linear_sum_assignment(-ov)
                worst = min(worst, float(ov[rows, cols].min()))
                # branch j sat at prev position prev_order[j]; map old index -> new index
                mapping = dict(zip(rows, cols))
                for j, pos in enumerate(prev_order):
                    if offset <= pos < offset + len(old):
                        order[j] = offset + int(mapping[pos - offset])
        orders.append(tuple(order))
        overlaps.append(worst)
        flags.append(worst < AMBIGUITY_THRESHOLD)
        prev, prev_order = ms, order
    return BranchTracking(branches, tuple(orders), tuple(overlaps), tuple(flags))
