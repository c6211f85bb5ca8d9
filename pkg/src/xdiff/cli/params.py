"""
Learned-parameter files
JSON holding lambda, the RBF basis, the four coefficient rows and provenance
"""
import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..config import format_validation_error
from ..errors import ConfigError
from ..learning.autodiff import ParameterVector
from ..numerics.influence import InfluenceSet, RbfBasis

SCHEMA_VERSION = 1


class BasisSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    a_min: float
    a_max: float
    p: int = Field(alias="P", ge=2)
    nu: float = Field(gt=0)

    def build(self) -> RbfBasis:
        return RbfBasis(self.p, self.a_min, self.a_max, self.nu)


class Provenance(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = None
    config_hash: Optional[str] = None
    iterations: int = Field(0, ge=0)
    source: str = "train"


class ParamsFile(BaseModel):
    """Serialized Theta, versioned"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    lam: float = Field(alias="lambda", ge=0)
    basis: BasisSpec
    deltas: List[List[float]]
    provenance: Provenance = Field(default_factory=Provenance)

    @model_validator(mode="after")
    def _check_shapes(self) -> "ParamsFile":
        if len(self.deltas) != 4:
            raise ValueError(f"deltas needs 4 rows (d1..d4), got {len(self.deltas)}")
        for ell, row in enumerate(self.deltas, start=1):
            if len(row) != self.basis.p:
                raise ValueError(f"deltas row {ell} has {len(row)} entries, basis has P={self.basis.p}")
        return self

    @classmethod
    def from_parameters(cls, theta: ParameterVector, basis: RbfBasis,
                        provenance: Optional[Provenance] = None) -> "ParamsFile":
        return cls(
            lam=theta.lam,
            basis=BasisSpec(a_min=basis.a_min, a_max=basis.a_max, p=basis.p, nu=basis.nu),
            deltas=theta.deltas().tolist(),
            provenance=provenance or Provenance(),
        )

    def parameters(self) -> ParameterVector:
        iset = self.influence()
        return ParameterVector.from_influence(iset, self.lam)

    def influence(self) -> InfluenceSet:
        return InfluenceSet(self.basis.build(), self.deltas)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2) + "\n"

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())

    @classmethod
    def read(cls, path) -> "ParamsFile":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"params file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"params file {path} is not valid JSON: {e}") from e
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"{path}: {format_validation_error(e)}") from e
