"""Command-line entry point: ``rotorphonon <command> --config run.json``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Optional, Sequence

from . import __version__
from .config import RunConfig, parse_config
from .coupling import form_for
from .errors import NumericalError, ResonanceError, ValidationError
from .io import (
    ResultEnvelope,
    modes_payload,
    resonance_payload,
    shift_entry,
    spectrum_payload,
    write_envelope,
)
from .scan import find_resonance, resonant_half_splittings, run_scan
from .spectrum import ProductLabel, dressed_spectrum, pt_shift_total, shift_result

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
THREADS_ENV = "ROTORPHONON_THREADS"


def _envelope(command, config: RunConfig, payload, t0) -> ResultEnvelope:
    return ResultEnvelope(command, __version__, config.echo(), payload, (time.perf_counter() - t0) * 1e3)


def cmd_modes(config: RunConfig) -> ResultEnvelope:
    t0 = time.perf_counter()
    sc = config.to_scenario()
    modes = sc.modes()
    payload = modes_payload(modes, sc.couplings(modes), sc.crystal.length_scale)
    return _envelope("modes", config, payload, t0)


def cmd_spectrum(config: RunConfig, mode_label: str) -> ResultEnvelope:
    t0 = time.perf_counter()
    sc = config.to_scenario()
    c = next((c for c in sc.couplings() if c.name == mode_label), None)
    if c is None:
        names = [c.name for c in sc.couplings()]
        raise ValidationError(f"unknown mode {mode_label!r}; available: {', '.join(names)}")
    form = form_for(c.mode)
    spec = dressed_spectrum(c.omega, sc.B, c.g, form, sc.trunc)
    return _envelope("spectrum", config, spectrum_payload(c.name, spec, c.g_hz, form), t0)


def cmd_shift(config: RunConfig, method: str = "perturbative") -> ResultEnvelope:
    """Sideband shift of every mode; resonant modes are flagged instead of failing."""
    t0 = time.perf_counter()
    sc = config.to_scenario()
    couplings = sc.couplings()
    B = sc.B
    shifts = []
    for c in couplings:
        try:
            res = shift_result(c, B, sc.trunc, method)
            shifts.append(shift_entry(res, c.name, c.mode.nu, c.g_hz))
        except ResonanceError:
            shifts.append(shift_entry(None, c.name, c.mode.nu, c.g_hz, "resonant"))
    try:
        ground = pt_shift_total([0] * len(couplings), 0, couplings, B)
    except ResonanceError:
        ground = None
    payload = {"B_hz": B, "method": method, "ground_state_shift_hz": ground, "shifts": shifts}
    return _envelope("shift", config, payload, t0)


def cmd_scan(config: RunConfig, threads: int = 1) -> ResultEnvelope:
    t0 = time.perf_counter()
    if config.scan is None:
        raise ValidationError("the scan command needs a 'scan' section in the config")
    table = run_scan(config.to_scenario(), config.scan.to_spec(), threads)
    return _envelope("scan", config, table, t0)


def cmd_resonance(config: RunConfig, branch: str, l: int, bracket, parameter: str = "nu_z",
                  tol_hz: float = 1.0) -> ResultEnvelope:
    t0 = time.perf_counter()
    sc = config.to_scenario()
    res = find_resonance(sc, branch, l, bracket, parameter, tol_hz)
    levels = tuple(n for n in (1, 2, 3) if n <= sc.trunc.n_max and l + 1 <= sc.trunc.l_max)
    split = resonant_half_splittings(sc, res, levels)
    return _envelope("resonance", config, resonance_payload(res, split), t0)


def resolve_threads(value: Optional[int], environ=os.environ) -> int:
    """--threads, else $ROTORPHONON_THREADS, else auto; 0 means one per CPU."""
    if value is None:
        raw = environ.get(THREADS_ENV, "").strip()
        if raw:
            try:
                value = int(raw)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        else:
            value = 0
    if value < 0:
        raise ValidationError(f"thread count must be >= 0, got {value}")
    return value or (os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output file (default: config output.path, else stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default: config output.format)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads for scans, 0 = auto (fallback: ${THREADS_ENV})")
    common.add_argument("--seed", type=int, default=None, help="accepted for fixture reproducibility; no command draws random numbers")
    common.add_argument("--timing", action="store_true", help="include wall time in JSON output")

    p = argparse.ArgumentParser(prog="rotorphonon", description="Rotor-phonon coupling in trapped-ion crystals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("modes", parents=[common], help="normal modes and coupling rates")
    sp = sub.add_parser("spectrum", parents=[common], help="dressed single-mode spectrum")
    sp.add_argument("--mode", required=True, help="mode name, e.g. axial_egyptian")
    sh = sub.add_parser("shift", parents=[common], help="sideband frequency shift per mode")
    sh.add_argument("--method", choices=("perturbative", "exact"), default="perturbative")
    sub.add_parser("scan", parents=[common], help="parameter scan from the config's scan section")
    rp = sub.add_parser("resonance", parents=[common], help="locate a mode/rotor resonance")
    rp.add_argument("--branch", required=True, help="mode name, e.g. axial_egyptian")
    rp.add_argument("--l", type=int, default=0, help="lower rotor level of the l -> l+1 transition")
    rp.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    rp.add_argument("--parameter", default="nu_z", help="parameter to tune (default nu_z)")
    rp.add_argument("--tol-hz", type=float, default=1.0)
    return p


def _run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        config = parse_config(text)
        threads = resolve_threads(args.threads)
        if args.command == "modes":
            env = cmd_modes(config)
        elif args.command == "spectrum":
            env = cmd_spectrum(config, args.mode)
        elif args.command == "shift":
            env = cmd_shift(config, args.method)
        elif args.command == "scan":
            env = cmd_scan(config, threads)
        else:
            env = cmd_resonance(config, args.branch, args.l, args.bracket, args.parameter, args.tol_hz)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    fmt = args.format or config.output.format
    path = args.out or config.output.path
    try:
        write_envelope(env, fmt, path, include_timing=args.timing)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
