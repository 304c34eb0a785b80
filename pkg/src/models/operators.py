"""
Core matrix types of the stochastic master equation and its operator maps.

Conventions:
- A model is stored in the basis of its source file; a SubspaceSplit carries the
  unitary whose first d_S columns span the target subspace H_S.
- Block quantities (S, P, Q, R) always refer to the adapted basis
  basis* X basis, partitioned at row/column d_S.
- Channels carry an explicit kind tag. Diffusive channels come first, jump
  channels after, so model.channels[i] matches the usual 0..p / p+1..n indexing.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import ChannelKindError, DimensionMismatchError, ModelValidationError

TOL_HERMITIAN_STATE = 1e-10
TOL_HAMILTONIAN = 1e-12
TOL_UNITARY = 1e-12


class ChannelKind(str, Enum):
    DIFFUSIVE = "diffusive"
    JUMP = "jump"


def dagger(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def hermitize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + dagger(X))


def _as_square(X, name: str, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(X, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"{name} must be a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f"{name} must be {dim}x{dim}, got {arr.shape[0]}x{arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ModelValidationError(f"{name} has non-finite entries")
    return arr


def validate_density_matrix(rho, dim: Optional[int] = None, tol: float = TOL_HERMITIAN_STATE) -> np.ndarray:
    """Return rho as a complex array after checking Hermiticity, positivity and unit trace."""
    arr = _as_square(rho, "rho", dim)
    if np.max(np.abs(arr - dagger(arr))) > tol:
        raise ModelValidationError("rho is not Hermitian")
    if abs(np.trace(arr) - 1.0) > tol:
        raise ModelValidationError(f"rho has trace {np.trace(arr).real:.12g}, expected 1")
    if np.min(np.linalg.eigvalsh(hermitize(arr))) < -tol:
        raise ModelValidationError("rho is not positive semidefinite")
    return arr


# =============================================================================
# SUBSPACE SPLIT
# =============================================================================

@dataclass(frozen=True)
class SubspaceSplit:
    """Decomposition H = H_S (+) H_R given by an adapted orthonormal basis."""

    d: int
    d_S: int
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.d_S < self.d:
            raise ModelValidationError(f"d_S={self.d_S} must lie in [1, {self.d - 1}]")
        basis = _as_square(self.basis, "basis", self.d)
        if np.max(np.abs(dagger(basis) @ basis - np.eye(self.d))) > TOL_UNITARY:
            raise ModelValidationError("basis is not unitary")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def standard(cls, d: int, d_S: int) -> "SubspaceSplit":
        return cls(d=d, d_S=d_S, basis=np.eye(d, dtype=complex))

    @property
    def d_R(self) -> int:
        return self.d - self.d_S

    @property
    def P_S(self) -> np.ndarray:
        U_S = self.basis[:, : self.d_S]
        return U_S @ dagger(U_S)

    @property
    def P_R(self) -> np.ndarray:
        return np.eye(self.d) - self.P_S

    @property
    def U_R(self) -> np.ndarray:
        """Columns spanning H_R; U_R X_R U_R* embeds an R-block back into H."""
        return self.basis[:, self.d_S:]

    def to_adapted(self, X: np.ndarray) -> np.ndarray:
        return dagger(self.basis) @ X @ self.basis

    def from_adapted(self, X: np.ndarray) -> np.ndarray:
        return self.basis @ X @ dagger(self.basis)

    def embed_S(self, rho_S: np.ndarray) -> np.ndarray:
        """diag(rho_S, 0) expressed in the original basis."""
        out = np.zeros((self.d, self.d), dtype=complex)
        out[: self.d_S, : self.d_S] = rho_S
        return self.from_adapted(out)

    def V(self, rho: np.ndarray) -> float:
        """Lyapunov function V(rho) = tr(P_R rho)."""
        return float(np.real(np.trace(self.P_R @ rho)))


# =============================================================================
# MODEL
# =============================================================================

@dataclass(frozen=True)
class Channel:
    op: np.ndarray = field(repr=False)
    kind: ChannelKind


@dataclass(frozen=True)
class SmeModel:
    """Hamiltonian plus ordered measurement channels (diffusive first, then jump)."""

    H: np.ndarray = field(repr=False)
    channels: Tuple[Channel, ...]

    def __post_init__(self):
        H = _as_square(self.H, "H")
        if np.max(np.abs(H - dagger(H))) > TOL_HAMILTONIAN:
            raise ModelValidationError("H is not Hermitian")
        if not self.channels:
            raise ModelValidationError("model needs at least one channel")

        d = H.shape[0]
        channels = []
        seen_jump = False
        for i, ch in enumerate(self.channels):
            kind = ChannelKind(ch.kind)
            if kind is ChannelKind.JUMP:
                seen_jump = True
            elif seen_jump:
                raise ModelValidationError(f"channel {i}: diffusive channels must precede jump channels")
            channels.append(Channel(op=_as_square(ch.op, f"channel {i}", d), kind=kind))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "channels", tuple(channels))

    @classmethod
    def create(cls, H, channels: Sequence[Tuple[np.ndarray, str]]) -> "SmeModel":
        """Build from (op, kind) pairs in any order; kinds are grouped stably."""
        pairs = [Channel(op=np.asarray(op, dtype=complex), kind=ChannelKind(kind)) for op, kind in channels]
        ordered = [c for c in pairs if c.kind is ChannelKind.DIFFUSIVE] + [
            c for c in pairs if c.kind is ChannelKind.JUMP
        ]
        return cls(H=np.asarray(H, dtype=complex), channels=tuple(ordered))

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def diffusive_indices(self) -> List[int]:
        return [i for i, c in enumerate(self.channels) if c.kind is ChannelKind.DIFFUSIVE]

    @property
    def jump_indices(self) -> List[int]:
        return [i for i, c in enumerate(self.channels) if c.kind is ChannelKind.JUMP]

    @property
    def p(self) -> int:
        """Index of the last diffusive channel (-1 when there is none)."""
        return len(self.diffusive_indices) - 1

    @property
    def n(self) -> int:
        return len(self.channels) - 1

    def ops(self, kind: Optional[ChannelKind] = None) -> np.ndarray:
        """Stacked channel operators, shape (k, d, d)."""
        selected = [c.op for c in self.channels if kind is None or c.kind is kind]
        if not selected:
            return np.zeros((0, self.d, self.d), dtype=complex)
        return np.stack(selected)

    def with_channel(self, op: np.ndarray, kind: ChannelKind) -> "SmeModel":
        pairs = [(c.op, c.kind) for c in self.channels] + [(op, kind)]
        return SmeModel.create(self.H, pairs)

    def _channel(self, i: int, kind: ChannelKind) -> np.ndarray:
        if not 0 <= i < len(self.channels):
            raise ChannelKindError(f"channel index {i} out of range [0, {len(self.channels) - 1}]")
        ch = self.channels[i]
        if ch.kind is not kind:
            raise ChannelKindError(f"channel {i} is {ch.kind.value}, expected {kind.value}")
        return ch.op


# =============================================================================
# BLOCK DECOMPOSITION
# =============================================================================

@dataclass(frozen=True)
class BlockDecomposition:
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def assemble(self) -> np.ndarray:
        """The 2x2 block matrix in the adapted basis."""
        return np.block([[self.S, self.P], [self.Q, self.R]])


def block_decompose(X, split: SubspaceSplit) -> BlockDecomposition:
    X = _as_square(X, "X", split.d)
    Y = split.to_adapted(X)
    k = split.d_S
    return BlockDecomposition(S=Y[:k, :k], P=Y[:k, k:], Q=Y[k:, :k], R=Y[k:, k:])


@dataclass(frozen=True)
class ModelBlocks:
    """H and every channel rotated into the adapted basis once."""

    split: SubspaceSplit
    H: BlockDecomposition
    channels: Tuple[BlockDecomposition, ...]
    kinds: Tuple[ChannelKind, ...]

    def of_kind(self, kind: ChannelKind) -> List[BlockDecomposition]:
        return [b for b, k in zip(self.channels, self.kinds) if k is kind]

    @property
    def leak(self) -> np.ndarray:
        """sum_j C_{j,P}* C_{j,P}, the d_R x d_R rate of mass leaving H_R."""
        d_R = self.split.d_R
        out = np.zeros((d_R, d_R), dtype=complex)
        for b in self.channels:
            out += dagger(b.P) @ b.P
        return out


def adapted_blocks(model: SmeModel, split: SubspaceSplit) -> ModelBlocks:
    if model.d != split.d:
        raise DimensionMismatchError(f"model dimension {model.d} != split dimension {split.d}")
    return ModelBlocks(
        split=split,
        H=block_decompose(model.H, split),
        channels=tuple(block_decompose(c.op, split) for c in model.channels),
        kinds=tuple(c.kind for c in model.channels),
    )


def reduced_state(rho: np.ndarray, split: SubspaceSplit, mu_R: Optional[np.ndarray] = None) -> np.ndarray:
    """rho_R / tr(rho_R), or mu_R (maximally mixed by default) when the R-block vanishes."""
    rho_R = block_decompose(rho, split).R
    mass = np.real(np.trace(rho_R))
    if mass > 0:
        return rho_R / mass
    if mu_R is not None:
        return np.asarray(mu_R, dtype=complex)
    return np.eye(split.d_R, dtype=complex) / split.d_R


# =============================================================================
# OPERATOR MAPS
# =============================================================================

def lindblad(model: SmeModel, rho) -> np.ndarray:
    """L(rho) = -i[H, rho] + sum_i (C rho C* - 1/2 {C*C, rho})."""
    rho = _as_square(rho, "rho", model.d)
    out = -1j * (model.H @ rho - rho @ model.H)
    for ch in model.channels:
        C = ch.op
        CdC = dagger(C) @ C
        out += C @ rho @ dagger(C) - 0.5 * (CdC @ rho + rho @ CdC)
    return out


def diffusion_term(model: SmeModel, i: int, rho) -> np.ndarray:
    """G_i(rho) = C rho + rho C* - tr[(C + C*) rho] rho for a diffusive channel."""
    C = model._channel(i, ChannelKind.DIFFUSIVE)
    rho = _as_square(rho, "rho", model.d)
    r = np.trace((C + dagger(C)) @ rho)
    return C @ rho + rho @ dagger(C) - r * rho


def jump_map(model: SmeModel, i: int, rho) -> Tuple[np.ndarray, float]:
    """(J_i(rho), intensity) with J_i(rho) = C rho C* and intensity tr J_i(rho)."""
    C = model._channel(i, ChannelKind.JUMP)
    rho = _as_square(rho, "rho", model.d)
    out = C @ rho @ dagger(C)
    return out, max(float(np.real(np.trace(out))), 0.0)
