"""Experiment configuration: a YAML file validated against a pydantic schema.

Unknown keys are rejected. Validation errors are reported with the dotted
key path and, when it can be located, the line in the source file.

Example::

    experiment: joint-amplitude
    seed: 7
    potential: {kind: harmonic, omega: 1.0}
    joint_amplitude: {x_i: 0.0, x_f: 1.0, t_final: 1.0, alpha: 0.5, dt: 0.002}
"""
from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from ..errors import ConfigError

__all__ = ["ExperimentConfig", "load_config", "parse_config", "EXPERIMENTS"]

EXPERIMENTS = ("propagate", "zfunctional", "joint-amplitude", "nslit", "records", "validate", "scan")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UnitsSpec(_Model):
    hbar: PositiveFloat = 1.0
    mass: PositiveFloat = 1.0


class PotentialSpec(_Model):
    kind: Literal["free", "harmonic", "quartic", "double_well"] = "free"
    omega: PositiveFloat = 1.0
    a: float = 0.25
    b: float = 0.0

    def build(self, mass: float):
        from ..core import Potential
        if self.kind == "free":
            return Potential.free()
        if self.kind == "harmonic":
            return Potential.harmonic(self.omega, mass)
        if self.kind == "quartic":
            return Potential.quartic(self.a, self.b)
        return Potential.double_well(self.a, self.b)


class GridSpec(_Model):
    lower: float = -102.4
    upper: float = 102.35
    n_points: PositiveInt = 4096

    @model_validator(mode="after")
    def _ordered(self):
        if not self.upper > self.lower:
            raise ValueError("upper must exceed lower")
        return self


class KickSpec(_Model):
    times: list[float] = Field(default_factory=list)
    kicks: list[float] = Field(default_factory=list)


class PropagateSpec(_Model):
    x0: float = 0.0
    sigma: PositiveFloat = 1.0
    k0: float = 0.0
    t_final: PositiveFloat = 1.0
    n_steps: PositiveInt = 1000
    kicks: KickSpec = Field(default_factory=KickSpec)


class ZFunctionalSpec(_Model):
    x_i: float = -0.5
    x_f: float = 0.5
    t_final: PositiveFloat = 1.0
    n_steps: PositiveInt = 1000
    method: Literal["split-step", "transfer"] = "split-step"
    kicks: KickSpec = Field(default_factory=KickSpec)


class JointAmplitudeSpec(_Model):
    x_i: float = 0.0
    x_f: float = 1.0
    t_final: PositiveFloat = 1.0
    alpha: PositiveFloat = 0.5
    dt: PositiveFloat = 1.0 / 512
    route: Literal["continuum", "discrete", "series"] = "continuum"
    offset: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    noise: bool = False


class DetectorSpec(_Model):
    kind: Literal["identical", "orthonormal", "overlap"] = "orthonormal"
    overlap: float = Field(default=0.5, ge=0.0, le=1.0)


class NSlitSpec(_Model):
    n_slits: PositiveInt = 2
    separation: PositiveFloat = 1.0
    screen_distance: PositiveFloat = 100.0
    wavelength: PositiveFloat = 0.01
    equal_weights: bool = True
    screen_lower: float = -3.0
    screen_upper: float = 3.0
    screen_points: PositiveInt = 601
    detectors: DetectorSpec = Field(default_factory=DetectorSpec)


class RecordsSpec(_Model):
    alpha: PositiveFloat = 0.5
    dt: PositiveFloat = 1.0 / 64
    t_final: PositiveFloat = 1.0
    n_records: PositiveInt = 1000
    x0: float = 1.0
    p0: float = 0.0
    fractions: list[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25])
    window: PositiveInt = 16
    export_records: bool = False


class ValidateSpec(_Model):
    checks: Optional[list[int]] = None


class ScanSpec(_Model):
    hbar: list[PositiveFloat] = Field(default_factory=lambda: [1.0, 0.5, 0.2, 0.1, 0.05, 0.02])
    lower: float = -2.0
    upper: float = 3.0
    n_points: PositiveInt = 21
    n_steps: PositiveInt = 3
    x_i: float = 0.0
    x_f: float = 1.0
    t_final: PositiveFloat = 1.0


class OutputSpec(_Model):
    dir: str = "out"
    format: Literal["csv", "json"] = "csv"


class ExperimentConfig(_Model):
    experiment: Literal[EXPERIMENTS] = "validate"
    seed: int = 0
    threads: Optional[PositiveInt] = None
    units: UnitsSpec = Field(default_factory=UnitsSpec)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    propagate: PropagateSpec = Field(default_factory=PropagateSpec)
    zfunctional: ZFunctionalSpec = Field(default_factory=ZFunctionalSpec)
    joint_amplitude: JointAmplitudeSpec = Field(default_factory=JointAmplitudeSpec)
    nslit: NSlitSpec = Field(default_factory=NSlitSpec)
    records: RecordsSpec = Field(default_factory=RecordsSpec)
    validate_: ValidateSpec = Field(default_factory=ValidateSpec, alias="validate")
    scan: ScanSpec = Field(default_factory=ScanSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def echo(self) -> dict:
        """Every field, defaults included, in source-key form."""
        return self.model_dump(mode="json", by_alias=True)


def _line_of(root, loc):
    """1-based line of the YAML node addressed by ``loc``, or None."""
    node, line = root, None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    line, nxt = k.start_mark.line + 1, v
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{source}: malformed YAML: {exc}", key=None,
                          line=mark.line + 1 if mark else None) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping", key=None, line=1)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        key = ".".join(str(p) for p in loc)
        line = _line_of(root, loc)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{source}: {key}{where}: {err['msg']}", key=key, line=line) from exc


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
