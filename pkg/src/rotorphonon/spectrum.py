"""Single-mode rotor-phonon spectra: exact diagonalization and perturbation theory.

Energies are in h*Hz throughout this module (i.e. plain Hz). Angular
inputs (``omega_p``, ``g``) are rad/s and are divided by 2pi on entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .constants import TWO_PI
from .coupling import FORMS, ModeCoupling, form_for
from .errors import ConvergenceError, DomainError, ResonanceError, ValidationError

RESONANCE_GUARD_HZ = 1e3
MIXING_THRESHOLD = 0.5
_DENSE_MAX_DIM = 2000


class ProductLabel(NamedTuple):
    """Bare product state |n, l>. For l != 0 it names a parity combination,
    (|n,|l|> + |n,-|l|>)/sqrt2 for l > 0 and the difference for l < 0."""

    n: int
    l: int


@dataclass(frozen=True)
class BasisTruncation:
    n_max: int = 10
    l_max: int = 15

    def __post_init__(self):
        problems = []
        if int(self.n_max) != self.n_max or self.n_max < 1:
            problems.append(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if int(self.l_max) != self.l_max or self.l_max < 1:
            problems.append(f"l_max must be an integer >= 1, got {self.l_max!r}")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * (2 * self.l_max + 1)

    def index(self, n, l) -> int:
        if not (0 <= n <= self.n_max and abs(l) <= self.l_max):
            raise ValidationError(f"state (n={n}, l={l}) outside truncation {self}")
        return (l + self.l_max) * (self.n_max + 1) + n

    def states(self):
        """(n, l) arrays in basis order."""
        nn = self.n_max + 1
        idx = np.arange(self.dim)
        return idx % nn, idx // nn - self.l_max

    def doubled(self):
        return BasisTruncation(2 * self.n_max, 2 * self.l_max)


def bare_energy(n, l, omega_p, B) -> float:
    """nu_p (n + 1/2) + B l^2 in Hz."""
    return omega_p / TWO_PI * (n + 0.5) + B * l * l


def _coupling_entries(g, form, trunc):
    """Upper-triangle (row, col, value) of the dipole coupling in the real gauge."""
    if form not in FORMS:
        raise ValidationError(f"form must be one of {FORMS}, got {form!r}")
    # sin form after |l> -> i^l |l>: every element is -(g/2pi) sqrt(n_>)
    sign = 1.0 if form == "cos" else -1.0
    gh = sign * g / TWO_PI
    nn = trunc.n_max + 1
    n = np.arange(trunc.n_max)  # lower phonon number of each pair
    ls = np.arange(-trunc.l_max, trunc.l_max)  # lower l of each pair
    nl, ll = np.meshgrid(n, ls, indexing="ij")
    nl, ll = nl.ravel(), ll.ravel()
    val = gh * np.sqrt(nl + 1.0)
    # (n, l) <-> (n+1, l+1) and (n+1, l) <-> (n, l+1)
    r1 = (ll + trunc.l_max) * nn + nl
    c1 = (ll + 1 + trunc.l_max) * nn + nl + 1
    r2 = (ll + trunc.l_max) * nn + nl + 1
    c2 = (ll + 1 + trunc.l_max) * nn + nl
    return np.concatenate([r1, r2]), np.concatenate([c1, c2]), np.concatenate([val, val])


def _diagonal(omega_p, B, trunc):
    n, l = trunc.states()
    return omega_p / TWO_PI * (n + 0.5) + B * l.astype(float) ** 2


def build_single_mode_hamiltonian(omega_p, B, g, form="cos", trunc=BasisTruncation()) -> np.ndarray:
    """Dense real-symmetric H0 + H_dp for one mode and the rotor, in Hz.

    Diagonal: nu_p (n + 1/2) + B l^2. Off-diagonal between (n, l) and
    (n +- 1, l +- 1): (g/2pi) sqrt(max(n, n')) for the cos form. The sin
    form is stored after the gauge |l> -> i^l |l>, which makes every
    coupling element -(g/2pi) sqrt(max(n, n')).
    """
    rows, cols, vals = _coupling_entries(g, form, trunc)
    h = np.diag(_diagonal(omega_p, B, trunc))
    h[rows, cols] = vals
    h[cols, rows] = vals
    return h


def _sparse_hamiltonian(omega_p, B, g, form, trunc):
    rows, cols, vals = _coupling_entries(g, form, trunc)
    d = _diagonal(omega_p, B, trunc)
    i = np.arange(trunc.dim)
    return sp.csc_matrix(
        (np.concatenate([d, vals, vals]), (np.concatenate([i, rows, cols]), np.concatenate([i, cols, rows]))),
        shape=(trunc.dim, trunc.dim),
    )


def symmetric_eigen(matrix):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a real symmetric matrix."""
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        raise ValidationError("expected a real matrix")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale and float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
        raise ValidationError("matrix is not symmetric")
    return np.linalg.eigh(a)


def _reference_rows(trunc):
    """Basis indices of (n, +|l|) and (n, -|l|) for every reference state."""
    n, l = trunc.states()
    nn = trunc.n_max + 1
    plus = (np.abs(l) + trunc.l_max) * nn + n
    minus = (-np.abs(l) + trunc.l_max) * nn + n
    return n, l, plus, minus


def _parity_basis(trunc):
    """Columns: the reference states (l = 0, even and odd +-|l| combinations) in basis order."""
    n, l, plus, minus = _reference_rows(trunc)
    s = 1.0 / math.sqrt(2.0)
    p = np.zeros((trunc.dim, trunc.dim))
    cols = np.arange(trunc.dim)
    zero, pos, neg = l == 0, l > 0, l < 0
    p[plus[zero], cols[zero]] = 1.0
    p[plus[pos], cols[pos]] = s
    p[minus[pos], cols[pos]] = s
    p[plus[neg], cols[neg]] = s
    p[minus[neg], cols[neg]] = -s
    return p, neg


def _parity_eigen(h, trunc):
    """Eigenpairs of H, which commutes with l -> -l, from its even and odd blocks.

    Keeps every eigenvector a pure parity state even when +-l levels are
    degenerate, so labels are never an arbitrary rotation of a pair.
    """
    p, odd = _parity_basis(trunc)
    hp = p.T @ h @ p
    vals, vecs = [], []
    for block in (~odd, odd):
        idx = np.flatnonzero(block)
        if idx.size == 0:
            continue
        w, u = symmetric_eigen(0.5 * (hp[np.ix_(idx, idx)] + hp[np.ix_(idx, idx)].T))
        vals.append(w)
        vecs.append(p[:, idx] @ u)
    w = np.concatenate(vals)
    v = np.concatenate(vecs, axis=1)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _reference_overlaps(vecs, trunc):
    """|<ref_r | dressed_d>|^2 for all reference states r and eigenvectors d."""
    n, l, plus, minus = _reference_rows(trunc)
    s = 1.0 / math.sqrt(2.0)
    amp = np.empty_like(vecs)
    zero = l == 0
    amp[zero] = vecs[plus[zero]]
    pos = l > 0
    amp[pos] = s * (vecs[plus[pos]] + vecs[minus[pos]])
    neg = l < 0
    amp[neg] = s * (vecs[plus[neg]] - vecs[minus[neg]])
    return amp**2


def _greedy_assign(overlap, threshold=1e-3):
    """Bijection reference -> dressed by descending overlap; ties to lower reference index."""
    dim = overlap.shape[0]
    ref_of = np.full(dim, -1)
    used_ref = np.zeros(dim, dtype=bool)
    r, d = np.nonzero(overlap >= threshold)
    vals = overlap[r, d]
    order = np.lexsort((d, r, -vals))
    assigned = 0
    for k in order:
        rr, dd = r[k], d[k]
        if used_ref[rr] or ref_of[dd] >= 0:
            continue
        ref_of[dd] = rr
        used_ref[rr] = True
        assigned += 1
        if assigned == dim:
            break
    if assigned < dim:
        for rr in np.flatnonzero(~used_ref):
            free = np.flatnonzero(ref_of < 0)
            dd = free[np.argmax(overlap[rr, free])]
            ref_of[dd] = rr
    return ref_of


@dataclass(frozen=True, eq=False)
class DressedSpectrum:
    """Eigenvalues (Hz, ascending) of the coupled single-mode Hamiltonian with bare labels."""

    eigenvalues: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)
    overlap: np.ndarray = field(repr=False)
    strongly_mixed: bool
    omega_p: float
    B: float
    trunc: BasisTruncation

    def index(self, n, l) -> int:
        try:
            return self.labels.index(ProductLabel(n, l))
        except ValueError:
            raise ValidationError(f"label (n={n}, l={l}) not in spectrum") from None

    def energy(self, n, l) -> float:
        return float(self.eigenvalues[self.index(n, l)])

    def shift(self, n, l) -> float:
        """Dressed minus bare energy for the level labelled (n, l), Hz."""
        return self.energy(n, l) - bare_energy(n, l, self.omega_p, self.B)


def dressed_spectrum(omega_p, B, g, form="cos", trunc=BasisTruncation()) -> DressedSpectrum:
    """Diagonalize H0 + H_dp and label each eigenvalue by its dominant bare state."""
    h = build_single_mode_hamiltonian(omega_p, B, g, form, trunc)
    w, v = _parity_eigen(h, trunc)
    ov = _reference_overlaps(v, trunc)
    ref_of = _greedy_assign(ov)
    n, l = trunc.states()
    labels = tuple(ProductLabel(int(n[r]), int(l[r])) for r in ref_of)
    assigned = ov[ref_of, np.arange(trunc.dim)]
    return DressedSpectrum(
        eigenvalues=w,
        labels=labels,
        overlap=assigned,
        strongly_mixed=bool(np.any(assigned < MIXING_THRESHOLD)),
        omega_p=omega_p,
        B=B,
        trunc=trunc,
    )


def pt_shift_mode(label, omega_p, B, g, eps_res=RESONANCE_GUARD_HZ) -> float:
    """Second-order shift (Hz) of |n, l> from coupling to one mode.

    (g/2pi)^2 times the sum over the four neighbours (n+-1, l+-1) of
    occupation factor / (E_{n,l} - E_{n',l'}). Raises ``ResonanceError`` if
    a contributing denominator is within ``eps_res`` Hz of zero.
    """
    n, l = label
    if n < 0:
        raise DomainError(f"phonon number must be >= 0, got {n}")
    if g == 0.0:
        return 0.0
    nu = omega_p / TWO_PI
    e0 = bare_energy(n, l, omega_p, B)
    terms = (
        (n + 1, e0 - bare_energy(n + 1, l + 1, omega_p, B)),
        (n + 1, e0 - bare_energy(n + 1, l - 1, omega_p, B)),
        (n, e0 - bare_energy(n - 1, l + 1, omega_p, B)),
        (n, e0 - bare_energy(n - 1, l - 1, omega_p, B)),
    )
    total = 0.0
    for weight, den in terms:
        if weight == 0:
            continue
        if abs(den) < eps_res:
            raise ResonanceError(
                f"near-resonant denominator {den:.3e} Hz for (n={n}, l={l}) at nu_p={nu:.6e} Hz, "
                f"B={B:.6e} Hz; use the resonant splitting formulas",
                den,
            )
        total += weight / den
    return (g / TWO_PI) ** 2 * total


def pt_shift_total(occupations: Sequence[int], l, couplings: Sequence[ModeCoupling], B,
                   eps_res=RESONANCE_GUARD_HZ) -> float:
    """Sum of single-mode shifts of |{n_p}, l>; ``occupations`` aligns with ``couplings``."""
    if len(occupations) != len(couplings):
        raise ValidationError("one occupation number per mode coupling is required")
    total = 0.0
    for n, c in zip(occupations, couplings):
        try:
            total += pt_shift_mode(ProductLabel(n, l), c.omega, B, c.g, eps_res)
        except ResonanceError as exc:
            raise ResonanceError(f"mode {c.name or c.mode.name}: {exc}", exc.denominator,
                                 c.name or c.mode.name) from None
    return total


def resonant_splitting_two_level(n, g) -> float:
    """Half-splitting (g/2pi) sqrt(n) of the resonant pair (n, l) / (n-1, l+1), Hz."""
    if n < 1:
        raise DomainError("resonant splitting needs n >= 1 (no lower partner for n = 0)")
    return abs(g) / TWO_PI * math.sqrt(n)


def resonant_splitting_l0(n, g) -> float:
    """Half-splitting (g/2pi) sqrt(2n) of the l = 0 triplet; the middle level is unshifted."""
    if n < 1:
        raise DomainError("resonant splitting needs n >= 1 (no lower partner for n = 0)")
    return abs(g) / TWO_PI * math.sqrt(2 * n)


@dataclass(frozen=True)
class ShiftResult:
    mode: str
    delta_E: dict
    delta_omega_p: float
    method: str


def sideband_shift(coupling: ModeCoupling, B, trunc: Optional[BasisTruncation] = None,
                   method="perturbative", eps_res=RESONANCE_GUARD_HZ) -> float:
    """Delta omega_p = Delta E(1, 0) - Delta E(0, 0) in Hz.

    ``method='exact'`` takes the shifts from the labelled dressed spectrum
    instead of second-order perturbation theory.
    """
    return shift_result(coupling, B, trunc, method, eps_res).delta_omega_p


def shift_result(coupling: ModeCoupling, B, trunc: Optional[BasisTruncation] = None,
                 method="perturbative", eps_res=RESONANCE_GUARD_HZ) -> ShiftResult:
    labels = (ProductLabel(0, 0), ProductLabel(1, 0))
    name = coupling.name or coupling.mode.name
    if coupling.g == 0.0:
        return ShiftResult(name, {lab: 0.0 for lab in labels}, 0.0, method)
    if method == "perturbative":
        de = {lab: pt_shift_mode(lab, coupling.omega, B, coupling.g, eps_res) for lab in labels}
    elif method == "exact":
        spec = dressed_spectrum(coupling.omega, B, coupling.g, form_for(coupling.mode),
                                trunc or BasisTruncation())
        de = {lab: spec.shift(*lab) for lab in labels}
    else:
        raise ValidationError(f"method must be 'perturbative' or 'exact', got {method!r}")
    return ShiftResult(name, de, de[labels[1]] - de[labels[0]], method)


def _reference_vector(label, trunc):
    v = np.zeros(trunc.dim)
    n, l = label
    if l == 0:
        v[trunc.index(n, 0)] = 1.0
    else:
        s = 1.0 / math.sqrt(2.0)
        v[trunc.index(n, abs(l))] = s
        v[trunc.index(n, -abs(l))] = s if l > 0 else -s
    return v


def _target_energies(omega_p, B, g, form, trunc, targets):
    if trunc.dim <= _DENSE_MAX_DIM:
        spec = dressed_spectrum(omega_p, B, g, form, trunc)
        return np.array([spec.energy(*t) for t in targets])
    h = _sparse_hamiltonian(omega_p, B, g, form, trunc)
    out = []
    k = min(8, trunc.dim - 2)
    for t in targets:
        e = bare_energy(t[0], t[1], omega_p, B)
        sigma = e + 1e-6 * (omega_p / TWO_PI + B)
        vals, vecs = eigsh(h, k=k, sigma=sigma, which="LM")
        ov = (_reference_vector(t, trunc) @ vecs) ** 2
        out.append(vals[int(np.argmax(ov))])
    return np.array(out)


def convergence_check(omega_p, B, g, trunc: BasisTruncation, targets, form="cos",
                      tol_hz=1e-3, max_dim=20000) -> BasisTruncation:
    """Double (n_max, l_max) until every target level moves by < ``tol_hz``.

    Returns the smallest truncation whose targets agree with its doubled
    successor. Raises ``ConvergenceError`` once the next basis would exceed
    ``max_dim`` states.
    """
    targets = [ProductLabel(*t) for t in targets]
    for t in targets:
        trunc.index(*t)
    current = trunc
    prev = _target_energies(omega_p, B, g, form, current, targets)
    while True:
        nxt = current.doubled()
        if nxt.dim > max_dim:
            raise ConvergenceError(
                f"target levels not converged before basis dimension cap {max_dim} "
                f"(last truncation n_max={current.n_max}, l_max={current.l_max})"
            )
        vals = _target_energies(omega_p, B, g, form, nxt, targets)
        change = float(np.max(np.abs(vals - prev)))
        if change < tol_hz:
            return current
        current, prev = nxt, vals
