"""Serialization of results to CSV and JSON."""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

from .coupling import ModeCoupling
from .crystal import ModeSet
from .errors import ValidationError
from .scan import ResonanceResult, ScanTable
from .spectrum import DressedSpectrum, ShiftResult

FORMATS = ("csv", "json")


def format_float(x) -> str:
    """17 significant digits; lossless for IEEE doubles."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _nan_if_none(x):
    return math.nan if x is None else float(x)


# ---------------------------------------------------------------- tables

def table_to_dict(table: ScanTable) -> dict:
    return {
        "parameter": table.parameter,
        "spacing": table.spacing,
        "rotor_index": table.rotor_index,
        "branches": list(table.branches),
        "columns": list(table.columns) + ["flags"],
        "rows": [[_json_float(v) for v in row] + [flag] for row, flag in zip(table.data, table.flags)],
    }


def table_from_dict(d: dict) -> ScanTable:
    try:
        columns = tuple(d["columns"])
        if not columns or columns[-1] != "flags":
            raise ValidationError("table columns must end with 'flags'")
        rows = d["rows"]
        data = tuple(tuple(_nan_if_none(v) for v in r[:-1]) for r in rows)
        flags = tuple(str(r[-1]) for r in rows)
        return ScanTable(
            parameter=d["parameter"],
            values=tuple(r[0] for r in data),
            columns=columns[:-1],
            data=data,
            flags=flags,
            branches=tuple(d.get("branches", ())),
            rotor_index=int(d.get("rotor_index", 0)),
            spacing=d.get("spacing", "linear"),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed table document: {exc!r}") from None


def table_to_csv(table: ScanTable) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(table.columns) + ["flags"])
    for row, flag in zip(table.data, table.flags):
        w.writerow([format_float(v) for v in row] + [flag])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write_text(text: str, path: Optional[str]):
    if path is None or path == "-":
        import sys
        sys.stdout.write(text)
        return
    # newline="" keeps "\n" on every platform so output bytes are reproducible
    with open(os.fspath(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_table(table: ScanTable, format: str = "csv", path: Optional[str] = None) -> None:
    """Write a scan table as CSV or JSON; ``path`` None or '-' means stdout.

    Raises OSError for unwritable paths.
    """
    if format == "csv":
        text = table_to_csv(table)
    elif format == "json":
        text = _dump_json(table_to_dict(table))
    else:
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    _write_text(text, path)


def read_table_json(path) -> ScanTable:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "payload" in doc and "columns" not in doc:
        doc = doc["payload"]
    return table_from_dict(doc)


# ---------------------------------------------------------------- payloads

def modes_payload(modes: ModeSet, couplings, length_scale) -> dict:
    by_name = {c.name: c for c in couplings}
    out = []
    for name, m in zip(modes.names, modes):
        c: ModeCoupling = by_name[name]
        out.append({
            "name": name,
            "direction": m.direction,
            "label": m.label,
            "parity": m.parity,
            "freq_hz": m.nu,
            "b": list(m.b),
            "field_scale_v_per_m": c.E0,
            "coupling_hz": c.g_hz,
        })
    return {
        "rotor_index": modes.rotor_index,
        "length_scale_m": length_scale,
        "positions_m": [float(z) for z in modes.positions],
        "modes": out,
    }


def modes_rows(payload: dict):
    n = len(payload["positions_m"])
    header = ["name", "direction", "label", "parity", "freq_hz"] + [f"b{i + 1}" for i in range(n)] + [
        "field_scale_v_per_m", "coupling_hz"]
    rows = [
        [m["name"], m["direction"], m["label"], m["parity"], format_float(m["freq_hz"])]
        + [format_float(x) for x in m["b"]]
        + [format_float(m["field_scale_v_per_m"]), format_float(m["coupling_hz"])]
        for m in payload["modes"]
    ]
    return header, rows


def spectrum_payload(name: str, spec: DressedSpectrum, g_hz: float, form: str) -> dict:
    levels = []
    for e, lab, ov in zip(spec.eigenvalues, spec.labels, spec.overlap):
        levels.append({
            "n": lab.n, "l": lab.l, "energy_hz": float(e),
            "shift_hz": float(e) - (spec.omega_p / (2 * math.pi) * (lab.n + 0.5) + spec.B * lab.l**2),
            "overlap": float(ov),
        })
    return {
        "mode": name,
        "form": form,
        "freq_hz": spec.omega_p / (2 * math.pi),
        "B_hz": spec.B,
        "coupling_hz": g_hz,
        "n_max": spec.trunc.n_max,
        "l_max": spec.trunc.l_max,
        "strongly_mixed": spec.strongly_mixed,
        "levels": levels,
    }


def spectrum_rows(payload: dict):
    header = ["n", "l", "energy_hz", "shift_hz", "overlap"]
    rows = [[str(v["n"]), str(v["l"]), format_float(v["energy_hz"]), format_float(v["shift_hz"]),
             format_float(v["overlap"])] for v in payload["levels"]]
    return header, rows


def shift_entry(res: Optional[ShiftResult], name, freq_hz, g_hz, flag="") -> dict:
    if res is None:
        return {"mode": name, "freq_hz": freq_hz, "coupling_hz": g_hz, "dE_n0_l0_hz": None,
                "dE_n1_l0_hz": None, "delta_omega_p_hz": None, "method": None, "flags": flag}
    return {
        "mode": name,
        "freq_hz": freq_hz,
        "coupling_hz": g_hz,
        "dE_n0_l0_hz": res.delta_E[(0, 0)],
        "dE_n1_l0_hz": res.delta_E[(1, 0)],
        "delta_omega_p_hz": res.delta_omega_p,
        "method": res.method,
        "flags": flag,
    }


def shift_rows(payload: dict):
    header = ["mode", "freq_hz", "coupling_hz", "dE_n0_l0_hz", "dE_n1_l0_hz", "delta_omega_p_hz", "method", "flags"]
    rows = []
    for s in payload["shifts"]:
        rows.append([s["mode"]] + [format_float(_nan_if_none(s[k])) for k in header[1:6]]
                    + [s["method"] or "", s["flags"]])
    return header, rows


def resonance_payload(res: ResonanceResult, splittings: dict) -> dict:
    return {
        "parameter": res.parameter,
        "value": res.value,
        "branch": res.branch,
        "l": res.l,
        "branch_freq_hz": res.branch_freq_hz,
        "B_hz": res.B_hz,
        "residual_hz": res.residual_hz,
        "iterations": res.iterations,
        "half_splitting_hz": splittings,
    }


def resonance_rows(payload: dict):
    header = ["parameter", "value", "branch", "l", "branch_freq_hz", "B_hz", "residual_hz", "iterations"]
    split = payload["half_splitting_hz"]
    header += [f"half_splitting_n{n}_hz" for n in split]
    row = [payload["parameter"], format_float(payload["value"]), payload["branch"], str(payload["l"]),
           format_float(payload["branch_freq_hz"]), format_float(payload["B_hz"]),
           format_float(payload["residual_hz"]), str(payload["iterations"])]
    row += [format_float(v) for v in split.values()]
    return header, [row]


def rows_to_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- envelope

@dataclass(frozen=True)
class ResultEnvelope:
    """Command result: config echo, package version, payload, and optional wall time."""

    command: str
    version: str
    config: dict
    payload: object
    wall_time_ms: Optional[float] = None

    def to_dict(self, include_timing=False) -> dict:
        payload = table_to_dict(self.payload) if isinstance(self.payload, ScanTable) else self.payload
        d = {"command": self.command, "version": self.version, "config": self.config, "payload": payload}
        if include_timing and self.wall_time_ms is not None:
            d["wall_time_ms"] = self.wall_time_ms
        return d

    def to_json(self, include_timing=False) -> str:
        return _dump_json(_sanitize(self.to_dict(include_timing)))


def _sanitize(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


_ROW_BUILDERS = {
    "modes": modes_rows,
    "spectrum": spectrum_rows,
    "shift": shift_rows,
    "resonance": resonance_rows,
}


def write_envelope(env: ResultEnvelope, format: str = "json", path: Optional[str] = None,
                   include_timing=False) -> None:
    """JSON writes the whole envelope; CSV writes only the payload rows."""
    if format == "json":
        text = env.to_json(include_timing)
    elif format == "csv":
        if isinstance(env.payload, ScanTable):
            text = table_to_csv(env.payload)
        else:
            text = rows_to_csv(*_ROW_BUILDERS[env.command](env.payload))
    else:
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    _write_text(text, path)
