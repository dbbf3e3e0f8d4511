"""Parameter sweeps over the crystal -> coupling -> spectrum pipeline."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .constants import DEBYE
from .coupling import RotorProperties, form_for, mode_couplings
from .crystal import CrystalConfig, ModeSet, normal_modes, track_branches
from .errors import BracketError, ConvergenceError, NumericalError, ResonanceError, ValidationError
from .spectrum import (
    BasisTruncation,
    ProductLabel,
    bare_energy,
    dressed_spectrum,
    pt_shift_mode,
    sideband_shift,
)

PARAMETERS = ("rotor_mass", "nu_z", "nu_y", "dipole", "rot_const")
OBSERVABLES = ("mode_freqs", "eigenvectors", "coupling", "pt_shift", "sideband_shift", "dressed_eigenvalues")
# levels reported by the dressed_eigenvalues observable: resonant pairs (n, 0) / (n-1, 1)
DRESSED_LEVELS = (
    ProductLabel(0, 0),
    ProductLabel(1, 0), ProductLabel(0, 1),
    ProductLabel(2, 0), ProductLabel(1, 1),
    ProductLabel(3, 0), ProductLabel(2, 1),
)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate the pipeline at one parameter point."""

    crystal: CrystalConfig
    rotor: RotorProperties
    trunc: BasisTruncation = BasisTruncation()

    @property
    def rotor_mass(self) -> float:
        return self.crystal.rotor.mass

    @property
    def B(self) -> float:
        return self.rotor.rotational_constant(self.rotor_mass)

    def with_parameter(self, name, value) -> "Scenario":
        """Copy with one scan parameter set (user units: u, Hz, Debye, Hz)."""
        if name == "rotor_mass":
            return replace(self, crystal=self.crystal.with_rotor_mass(value))
        if name == "nu_z":
            return replace(self, crystal=self.crystal.with_trap(nu_z=value))
        if name == "nu_y":
            return replace(self, crystal=self.crystal.with_trap(nu_y=value))
        if name == "dipole":
            return replace(self, rotor=replace(self.rotor, mu=value * DEBYE))
        if name == "rot_const":
            return replace(self, rotor=replace(self.rotor, b_hz=value))
        raise ValidationError(f"unknown scan parameter {name!r}; expected one of {PARAMETERS}")

    def modes(self) -> ModeSet:
        return normal_modes(self.crystal)

    def couplings(self, modes: Optional[ModeSet] = None):
        return mode_couplings(modes if modes is not None else self.modes(), self.rotor_mass, self.rotor.mu)


@dataclass(frozen=True)
class ScanSpec:
    parameter: str
    grid: tuple
    observables: tuple = ("mode_freqs", "coupling")
    spacing: str = "linear"
    mode: Optional[str] = None  # branch used by dressed_eigenvalues

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        object.__setattr__(self, "observables", tuple(self.observables))
        problems = []
        if self.parameter not in PARAMETERS:
            problems.append(f"parameter must be one of {PARAMETERS}, got {self.parameter!r}")
        if not self.grid:
            problems.append("grid is empty")
        d = np.diff(self.grid)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            problems.append("grid must be strictly monotone")
        bad = [o for o in self.observables if o not in OBSERVABLES]
        if bad:
            problems.append(f"unknown observables {bad}; expected a subset of {OBSERVABLES}")
        if "dressed_eigenvalues" in self.observables and not self.mode:
            problems.append("dressed_eigenvalues needs a mode branch name")
        if self.spacing not in ("linear", "log"):
            problems.append("spacing must be 'linear' or 'log'")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @classmethod
    def from_range(cls, parameter, start, stop, steps, spacing="linear", **kw):
        if steps < 2:
            raise ValidationError("a ranged grid needs steps >= 2")
        if spacing == "log":
            grid = np.geomspace(start, stop, steps)
        else:
            grid = np.linspace(start, stop, steps)
        return cls(parameter, tuple(grid), spacing=spacing, **kw)


@dataclass(frozen=True, eq=False)
class ScanTable:
    """Rows in grid order; ``columns`` names every entry of ``data`` rows."""

    parameter: str
    values: tuple
    columns: tuple
    data: tuple
    flags: tuple
    branches: tuple = ()
    rotor_index: int = 0
    spacing: str = "linear"

    def __len__(self):
        return len(self.values)

    def column(self, name) -> np.ndarray:
        try:
            k = self.columns.index(name)
        except ValueError:
            raise ValidationError(f"no column {name!r} in table") from None
        return np.array([row[k] for row in self.data], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, ScanTable):
            return NotImplemented
        same_data = len(self.data) == len(other.data) and all(
            np.array_equal(np.asarray(a, float), np.asarray(b, float), equal_nan=True)
            for a, b in zip(self.data, other.data)
        )
        return (
            self.parameter == other.parameter
            and tuple(self.values) == tuple(other.values)
            and tuple(self.columns) == tuple(other.columns)
            and same_data
            and tuple(self.flags) == tuple(other.flags)
            and tuple(self.branches) == tuple(other.branches)
            and self.rotor_index == other.rotor_index
            and self.spacing == other.spacing
        )


@dataclass
class _Point:
    modes: Optional[ModeSet] = None
    per_mode: dict = field(default_factory=dict)  # observable -> list aligned with iter(modes)
    dressed: Optional[list] = None
    flags: list = field(default_factory=list)


def _evaluate_point(scenario: Scenario, spec: ScanSpec, value) -> _Point:
    pt = _Point()
    try:
        sc = scenario.with_parameter(spec.parameter, value)
        modes = sc.modes()
    except (NumericalError, ValidationError) as exc:
        pt.flags.append("failed:" + _clean(str(exc)))
        return pt
    pt.modes = modes
    obs = spec.observables
    couplings = sc.couplings(modes)
    B = sc.B if any(o in obs for o in ("pt_shift", "sideband_shift", "dressed_eigenvalues")) else None
    if "coupling" in obs:
        pt.per_mode["coupling"] = [c.g_hz for c in couplings]
    for key, fn in (
        ("pt_shift", lambda c: pt_shift_mode(ProductLabel(0, 0), c.omega, B, c.g)),
        ("sideband_shift", lambda c: sideband_shift(c, B)),
    ):
        if key not in obs:
            continue
        vals = []
        for c in couplings:
            try:
                vals.append(fn(c))
            except ResonanceError:
                vals.append(math.nan)
                flag = f"resonant:{c.name}"
                if flag not in pt.flags:
                    pt.flags.append(flag)
        pt.per_mode[key] = vals
    if "dressed_eigenvalues" in obs:
        c = next((c for c in couplings if c.name == spec.mode), None)
        if c is None:
            pt.flags.append(f"failed:no mode {spec.mode}")
        else:
            ds = dressed_spectrum(c.omega, B, c.g, form_for(c.mode), sc.trunc)
            pt.dressed = [ds.energy(*lab) for lab in DRESSED_LEVELS]
            pt.dressed += [
                ds.energy(n, 0) - bare_energy(n, 0, c.omega, B) for n in (1, 2, 3)
            ]
            if ds.strongly_mixed:
                pt.flags.append("strongly_mixed")
    return pt


def _clean(text):
    return " ".join(text.replace(",", " ").replace(";", " ").split())


def _column_names(spec: ScanSpec, branches, n_sites):
    cols = []
    obs = spec.observables
    if "mode_freqs" in obs:
        cols += [f"{b}_freq_hz" for b in branches]
    if "eigenvectors" in obs:
        cols += [f"{b}_b{i + 1}" for b in branches for i in range(n_sites)]
    if "coupling" in obs:
        cols += [f"{b}_coupling_hz" for b in branches]
    if "pt_shift" in obs:
        cols += [f"{b}_pt_shift_hz" for b in branches]
    if "sideband_shift" in obs:
        cols += [f"{b}_sideband_shift_hz" for b in branches]
    if "dressed_eigenvalues" in obs:
        cols += [f"{spec.mode}_E_n{lab.n}_l{lab.l}_hz" for lab in DRESSED_LEVELS]
        cols += [f"{spec.mode}_dE_n{n}_l0_hz" for n in (1, 2, 3)]
    return cols


def run_scan(scenario: Scenario, spec: ScanSpec, threads: int = 1) -> ScanTable:
    """Evaluate every grid point, then track branches sequentially.

    Points are independent and may run on ``threads`` workers; results are
    always assembled in grid order, so the table does not depend on the
    thread count. Failed points are kept as NaN rows with a reason flag.
    """
    grid = spec.grid
    if threads and threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda v: _evaluate_point(scenario, spec, v), grid))
    else:
        points = [_evaluate_point(scenario, spec, v) for v in grid]

    tracking = track_branches([p.modes for p in points])
    n_sites = scenario.crystal.n
    branches = tracking.branches
    columns = ["param"] + _column_names(spec, branches, n_sites)
    n_cols = len(columns) - 1
    rows, flags = [], []
    for value, pt, order, amb in zip(grid, points, tracking.order, tracking.ambiguous):
        row_flags = list(pt.flags)
        if amb:
            row_flags.append("tracking_ambiguous")
        if pt.modes is None or order is None:
            rows.append((value,) + (math.nan,) * n_cols)
            flags.append(";".join(row_flags))
            continue
        modes = list(pt.modes)
        row = [value]
        obs = spec.observables
        if "mode_freqs" in obs:
            row += [modes[k].nu for k in order]
        if "eigenvectors" in obs:
            for k in order:
                row += list(modes[k].b)
        for key in ("coupling", "pt_shift", "sideband_shift"):
            if key in obs:
                row += [pt.per_mode[key][k] for k in order]
        if "dressed_eigenvalues" in obs:
            row += pt.dressed if pt.dressed is not None else [math.nan] * (len(DRESSED_LEVELS) + 3)
        rows.append(tuple(float(x) for x in row))
        flags.append(";".join(row_flags))
    return ScanTable(
        parameter=spec.parameter,
        values=tuple(grid),
        columns=tuple(columns),
        data=tuple(rows),
        flags=tuple(flags),
        branches=tuple(branches),
        rotor_index=scenario.crystal.rotor_index,
        spacing=spec.spacing,
    )


@dataclass(frozen=True)
class ResonanceResult:
    parameter: str
    value: float
    branch: str
    l: int
    branch_freq_hz: float
    B_hz: float
    residual_hz: float
    iterations: int

    @property
    def transition(self):
        return (self.l, self.l + 1)


def find_resonance(scenario: Scenario, branch, l, bracket, parameter="nu_z",
                   tol_hz=1.0, max_iter=200) -> ResonanceResult:
    """Bisect for nu_branch(x) = (2l + 1) B(x) on ``bracket``.

    The branch is looked up by name at every evaluation; for labelled
    crystals the name is constant along an overlap-tracked branch.
    """
    if l < 0:
        raise ValidationError("l must be >= 0")

    def f(x):
        sc = scenario.with_parameter(parameter, x)
        nu = sc.modes().by_name(branch).nu
        return nu - (2 * l + 1) * sc.B, nu, sc.B

    lo, hi = sorted(float(v) for v in bracket)
    f_lo = f(lo)[0]
    f_hi = f(hi)[0]
    if f_lo == 0.0:
        hi = lo
    elif f_hi == 0.0:
        lo = hi
    elif math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketError(
            f"no sign change of nu_{branch} - {2 * l + 1}B on [{lo:.6g}, {hi:.6g}] "
            f"(f = {f_lo:.3e}, {f_hi:.3e} Hz)"
        )
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        fm, nu, B = f(mid)
        if abs(fm) < tol_hz:
            return ResonanceResult(parameter, mid, branch, l, nu, B, abs(fm), it)
        it += 1
        if it > max_iter or hi - lo <= 4 * np.spacing(mid):
            raise ConvergenceError(f"bisection stalled with residual {fm:.3e} Hz", abs(fm))
        if math.copysign(1.0, fm) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, fm
        else:
            hi = mid


@dataclass(frozen=True)
class CrossingResult:
    branch_a: str
    branch_b: str
    found: bool
    location: float = math.nan
    gap_hz: float = math.nan
    index: int = -1


def _adjacent_spacing_median(table: ScanTable, direction):
    cols = [c for c in table.columns if c.startswith(direction + "_") and c.endswith("_freq_hz")]
    if len(cols) < 2:
        return math.nan
    f = np.sort(np.column_stack([table.column(c) for c in cols]), axis=1)
    d = np.diff(f, axis=1).ravel()
    d = d[np.isfinite(d)]
    return float(np.median(d)) if d.size else math.nan


def avoided_crossing_gap(table: ScanTable, branch_a, branch_b) -> CrossingResult:
    """Minimal |nu_a - nu_b| along the scan, refined by a 3-point parabola.

    Not found if the minimum sits at either end of the valid rows or the
    gap exceeds 10x the median adjacent-level spacing of the table.
    Refinement is done in log(parameter) for log-spaced tables.
    """
    fa = table.column(f"{branch_a}_freq_hz")
    fb = table.column(f"{branch_b}_freq_hz")
    x = np.array(table.values, dtype=float)
    ok = np.isfinite(fa) & np.isfinite(fb)
    gap = np.abs(fa - fb)[ok]
    xs = x[ok]
    idx = np.flatnonzero(ok)
    if gap.size < 3:
        return CrossingResult(branch_a, branch_b, False)
    k = int(np.argmin(gap))
    if k == 0 or k == gap.size - 1:
        return CrossingResult(branch_a, branch_b, False)
    # a flat gap (parallel branches) has no genuine interior minimum
    margin = 1e-9 * float(np.max(gap))
    if gap[0] - gap[k] <= margin or gap[-1] - gap[k] <= margin:
        return CrossingResult(branch_a, branch_b, False)
    direction = branch_a.split("_")[0]
    med = _adjacent_spacing_median(table, direction)
    if math.isfinite(med) and gap[k] > 10.0 * med:
        return CrossingResult(branch_a, branch_b, False)
    t = np.log(xs) if table.spacing == "log" else xs
    t3, g3 = t[k - 1:k + 2], gap[k - 1:k + 2]
    c2, c1, c0 = np.polyfit(t3 - t3[1], g3, 2)
    if c2 > 0:
        dt = -c1 / (2.0 * c2)
        dt = float(np.clip(dt, t3[0] - t3[1], t3[2] - t3[1]))
        g_min = c0 + c1 * dt + c2 * dt * dt
    else:
        dt, g_min = 0.0, g3[1]
    t_min = t3[1] + dt
    loc = float(np.exp(t_min)) if table.spacing == "log" else float(t_min)
    return CrossingResult(branch_a, branch_b, True, loc, float(g_min), int(idx[k]))


def detect_avoided_crossings(table: ScanTable) -> list:
    """All avoided crossings between same-direction branch pairs.

    A pair qualifies when its frequency order never flips (a flip is a true
    crossing), its gap has an interior minimum, and the branch dominated by
    the rotor's motion at one end of the scan is the other one at the far
    end. Needs the mode_freqs and eigenvectors observables.
    """
    r = table.rotor_index + 1
    found = []
    for i, a in enumerate(table.branches):
        for b in table.branches[i + 1:]:
            if a.split("_")[0] != b.split("_")[0]:
                continue
            fa = table.column(f"{a}_freq_hz")
            fb = table.column(f"{b}_freq_hz")
            ok = np.isfinite(fa) & np.isfinite(fb)
            if ok.sum() < 3:
                continue
            s = np.sign((fa - fb)[ok])
            if np.any(s != s[0]):
                continue
            ra = table.column(f"{a}_b{r}")[ok] ** 2
            rb = table.column(f"{b}_b{r}")[ok] ** 2
            dom = np.sign(ra - rb)
            if dom[0] == 0 or dom[-1] == 0 or dom[0] == dom[-1]:
                continue
            res = avoided_crossing_gap(table, a, b)
            if res.found:
                found.append(res)
    return found


def resonant_half_splittings(scenario: Scenario, result: ResonanceResult, levels=(1, 2, 3)) -> dict:
    """Half gap |E(n, l) - E(n-1, l+1)| / 2 (Hz) of the dressed pair at the resonance point.

    Exact diagonalization of the resonant branch; keys are the phonon numbers n.
    """
    sc = scenario.with_parameter(result.parameter, result.value)
    c = next((c for c in sc.couplings() if c.name == result.branch), None)
    if c is None:
        raise ValidationError(f"no mode named {result.branch!r}")
    ds = dressed_spectrum(c.omega, sc.B, c.g, form_for(c.mode), sc.trunc)
    out = {}
    for n in levels:
        if n < 1:
            raise ValidationError("resonant pairs need n >= 1")
        out[n] = abs(ds.energy(n, result.l) - ds.energy(n - 1, result.l + 1)) / 2.0
    return out
