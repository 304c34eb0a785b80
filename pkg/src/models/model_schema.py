"""
Model File Schema - pydantic validation for SME model files

Format (JSON, UTF-8, matrices row-major, entries as [re, im] pairs):
    {"dim": 2, "d_S": 1, "basis": optional, "H": [[...]], "channels": [{"matrix": [[...]], "kind": "diffusive"}]}

Rules:
- every matrix is dim x dim with finite [re, im] entries
- 1 <= d_S <= dim - 1
- kind is "diffusive" or "jump"; at least one channel
- H Hermitian and basis unitary within the configured tolerances (checked when the
  in-memory model is built)
"""

import json
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator, model_validator
from scipy.linalg import polar

from src.models.operators import ChannelKind, SmeModel, SubspaceSplit, dagger, hermitize
from src.models.run_config import Tolerances
from src.utils.errors import QsmeError, ModelValidationError

Entry = List[float]
MatrixJson = List[List[Entry]]


def _check_matrix(rows: MatrixJson, name: str) -> MatrixJson:
    for row in rows:
        for entry in row:
            if len(entry) != 2:
                raise ValueError(f"{name}: entries must be [re, im] pairs, got {entry}")
            if not all(np.isfinite(entry)):
                raise ValueError(f"{name}: non-finite entry {entry}")
    return rows


def matrix_from_json(rows: MatrixJson) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_json(X: np.ndarray) -> MatrixJson:
    X = np.asarray(X, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in X]


class ChannelSpec(BaseModel):
    matrix: MatrixJson
    kind: ChannelKind

    @field_validator("matrix")
    @classmethod
    def validate_matrix(cls, v: MatrixJson) -> MatrixJson:
        return _check_matrix(v, "channel matrix")


class ModelFile(BaseModel):
    """Canonical model-file schema."""

    dim: int
    d_S: int
    basis: Optional[MatrixJson] = None
    H: MatrixJson
    channels: List[ChannelSpec]

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"dim must be >= 2, got {v}")
        return v

    @field_validator("H", "basis")
    @classmethod
    def validate_matrices(cls, v: Optional[MatrixJson], info) -> Optional[MatrixJson]:
        if v is None:
            return v
        return _check_matrix(v, info.field_name)

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v: List[ChannelSpec]) -> List[ChannelSpec]:
        if not v:
            raise ValueError("model needs at least one channel")
        return v

    @model_validator(mode="after")
    def check_shapes(self):
        """Cross-field validation: every matrix is dim x dim and d_S in range."""
        if not 1 <= self.d_S <= self.dim - 1:
            raise ValueError(f"d_S={self.d_S} must lie in [1, {self.dim - 1}]")

        named = [("H", self.H)] + [(f"channel {i}", c.matrix) for i, c in enumerate(self.channels)]
        if self.basis is not None:
            named.append(("basis", self.basis))
        for name, rows in named:
            if len(rows) != self.dim or any(len(row) != self.dim for row in rows):
                raise ValueError(f"{name} must be {self.dim}x{self.dim} (dimension mismatch)")
        return self


def _check_hamiltonian(H: np.ndarray, tol: float) -> np.ndarray:
    residual = float(np.max(np.abs(H - dagger(H))))
    if residual > tol:
        raise ModelValidationError(f"H is not Hermitian: max |H - H*| = {residual:.3g} > {tol:.3g}")
    return hermitize(H)


def _check_basis(basis: np.ndarray, tol: float) -> np.ndarray:
    residual = float(np.max(np.abs(dagger(basis) @ basis - np.eye(basis.shape[0]))))
    if residual > tol:
        raise ModelValidationError(f"basis is not unitary: max |U*U - I| = {residual:.3g} > {tol:.3g}")
    return polar(basis)[0]


def build_model(spec: ModelFile, tolerances: Optional[Tolerances] = None) -> Tuple[SmeModel, SubspaceSplit]:
    """
    Turn a validated file into in-memory types; channel kinds are grouped diffusive first.

    H and the basis are checked against the configured tolerances, then replaced by
    their Hermitian part and nearest unitary.
    """
    tolerances = tolerances or Tolerances()
    pairs = [(matrix_from_json(c.matrix), c.kind) for c in spec.channels]
    H = _check_hamiltonian(matrix_from_json(spec.H), tolerances.hamiltonian)
    model = SmeModel.create(H, pairs)
    if spec.basis is None:
        split = SubspaceSplit.standard(spec.dim, spec.d_S)
    else:
        basis = _check_basis(matrix_from_json(spec.basis), tolerances.unitarity)
        split = SubspaceSplit(d=spec.dim, d_S=spec.d_S, basis=basis)
    return model, split


def parse_model(text: str, tolerances: Optional[Tolerances] = None) -> Tuple[SmeModel, SubspaceSplit]:
    """
    Parse model-file content into (SmeModel, SubspaceSplit).

    Raises:
        ModelValidationError: malformed JSON, schema violation, non-Hermitian H,
            non-unitary basis, dimension mismatch or d_S out of range.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelValidationError(f"malformed JSON: {e}") from e

    try:
        spec = ModelFile.model_validate(raw)
    except ValidationError as e:
        raise ModelValidationError(f"schema violation: {e}") from e

    try:
        return build_model(spec, tolerances)
    except QsmeError as e:
        raise ModelValidationError(str(e)) from e


def load_model(path, tolerances: Optional[Tolerances] = None) -> Tuple[SmeModel, SubspaceSplit]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_model(f.read(), tolerances)


def serialize_model(model: SmeModel, split: SubspaceSplit) -> str:
    payload = {
        "dim": model.d,
        "d_S": split.d_S,
        "H": matrix_to_json(model.H),
        "channels": [{"matrix": matrix_to_json(c.op), "kind": c.kind.value} for c in model.channels],
    }
    if not np.allclose(split.basis, np.eye(split.d)):
        payload["basis"] = matrix_to_json(split.basis)
    return json.dumps(payload, indent=2)
