"""Run configuration: JSON in, validated and defaulted model out."""

from __future__ import annotations

import json
from typing import List, Literal, Optional, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, model_validator

from .constants import ANGSTROM
from .coupling import RotorProperties
from .crystal import CrystalConfig, TrapConfig
from .errors import ValidationError
from .scan import OBSERVABLES, PARAMETERS, Scenario, ScanSpec
from .spectrum import BasisTruncation

Observable = Literal["mode_freqs", "eigenvectors", "coupling", "pt_shift", "sideband_shift", "dressed_eigenvalues"]
Parameter = Literal["rotor_mass", "nu_z", "nu_y", "dipole", "rot_const"]
assert set(Observable.__args__) == set(OBSERVABLES)
assert set(Parameter.__args__) == set(PARAMETERS)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TrapSection(_Strict):
    nu_z_hz: PositiveFloat
    nu_y_hz: PositiveFloat
    radial_scaling: Literal["uniform", "pseudopotential"] = "uniform"

    @model_validator(mode="after")
    def _radial_stiffer(self):
        if self.nu_y_hz <= self.nu_z_hz:
            raise ValueError("nu_y_hz must exceed nu_z_hz for a linear crystal")
        return self


class AtomsSection(_Strict):
    mass_u: PositiveFloat
    charge_e: PositiveInt = 1
    count_per_side: PositiveInt = 1


class SphereSection(_Strict):
    radius_angstrom: PositiveFloat


class RotorSection(_Strict):
    mass_u: PositiveFloat
    charge_e: PositiveInt = 1
    dipole_debye: NonNegativeFloat
    b_hz: Optional[PositiveFloat] = None
    sphere: Optional[SphereSection] = None

    @model_validator(mode="after")
    def _one_rotational_model(self):
        if (self.b_hz is None) == (self.sphere is None):
            raise ValueError("exactly one of rotor.b_hz and rotor.sphere must be given")
        return self


class BasisSection(_Strict):
    n_max: int = Field(10, ge=1)
    l_max: int = Field(15, ge=1)


class GridRange(_Strict):
    min: PositiveFloat
    max: PositiveFloat
    steps: int = Field(ge=2)
    spacing: Literal["linear", "log"] = "linear"


class ScanSection(_Strict):
    parameter: Parameter
    grid: Union[List[float], GridRange]
    observables: List[Observable] = ["mode_freqs", "coupling"]
    mode: Optional[str] = None

    def to_spec(self) -> ScanSpec:
        if isinstance(self.grid, GridRange):
            g = self.grid
            return ScanSpec.from_range(self.parameter, g.min, g.max, g.steps, g.spacing,
                                       observables=tuple(self.observables), mode=self.mode)
        return ScanSpec(self.parameter, tuple(self.grid), tuple(self.observables), mode=self.mode)


class OutputSection(_Strict):
    format: Literal["csv", "json"] = "json"
    path: Optional[str] = None


class RunConfig(_Strict):
    trap: TrapSection
    atoms: AtomsSection
    rotor: RotorSection
    basis: BasisSection = BasisSection()
    scan: Optional[ScanSection] = None
    output: OutputSection = OutputSection()

    def to_scenario(self) -> Scenario:
        trap = TrapConfig(self.trap.nu_z_hz, self.trap.nu_y_hz, self.trap.radial_scaling)
        crystal = CrystalConfig.linear(
            self.atoms.mass_u, self.rotor.mass_u, trap,
            atom_charge=self.atoms.charge_e, rotor_charge=self.rotor.charge_e,
            count_per_side=self.atoms.count_per_side,
        )
        radius = self.rotor.sphere.radius_angstrom * ANGSTROM if self.rotor.sphere else None
        rotor = RotorProperties.from_debye(self.rotor.dipole_debye, self.rotor.b_hz, radius)
        return Scenario(crystal, rotor, BasisTruncation(self.basis.n_max, self.basis.l_max))

    def echo(self) -> dict:
        """Normalized, JSON-ready form; parse_config(serialize_config(c)) == c."""
        return self.model_dump(mode="json")


def _format_errors(exc: pydantic.ValidationError) -> list:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Every violation is collected into one ``ValidationError``.
    """
    if not text.strip():
        text = "{}"
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        errors = _format_errors(exc)
        raise ValidationError("invalid configuration:\n  " + "\n  ".join(errors), errors) from None


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config.echo(), indent=2, sort_keys=True)
