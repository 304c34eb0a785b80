"""
Superoperator matrices, reduced generators L_S / L_R and the deterministic mean flow.

Column-stacking convention throughout: vec(X) = X.reshape(-1, order="F"), so
vec(A X B) = (B^T kron A) vec(X).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import expm

from src.models.operators import (
    ModelBlocks,
    SmeModel,
    SubspaceSplit,
    _as_square,
    adapted_blocks,
    dagger,
    hermitize,
    lindblad,
)
from src.utils.errors import DimensionMismatchError, ModelValidationError


class Generator(str, Enum):
    L = "L"
    L_S = "L_S"
    L_R = "L_R"
    L_R_ADJOINT = "L_R_adjoint"


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def left(A: np.ndarray) -> np.ndarray:
    """Matrix of X -> A X."""
    return np.kron(np.eye(A.shape[0]), A)


def right(B: np.ndarray) -> np.ndarray:
    """Matrix of X -> X B."""
    return np.kron(B.T, np.eye(B.shape[0]))


def sandwich(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of X -> A X B."""
    return np.kron(B.T, A)


@dataclass(frozen=True)
class Superoperator:
    """A linear map on dim x dim matrices as a dim^2 x dim^2 matrix."""

    mat: np.ndarray = field(repr=False)
    dim: int

    def __post_init__(self):
        n = self.dim * self.dim
        if self.mat.shape != (n, n):
            raise DimensionMismatchError(f"superoperator for dim {self.dim} must be {n}x{n}, got {self.mat.shape}")

    def apply(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.mat @ vec(X), self.dim)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.mat)


def superop_matrix(fn: Callable[[np.ndarray], np.ndarray], dim: int) -> Superoperator:
    """Represent any linear map by applying it to the matrix units E_kl."""
    n = dim * dim
    mat = np.zeros((n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        mat[:, k] = vec(fn(unvec(e, dim)))
    return Superoperator(mat=mat, dim=dim)


# =============================================================================
# GENERATORS
# =============================================================================

def _dissipator(ops, dim: int) -> np.ndarray:
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for C in ops:
        CdC = dagger(C) @ C
        out += sandwich(C, dagger(C)) - 0.5 * (left(CdC) + right(CdC))
    return out


def lindblad_superop(model: SmeModel) -> Superoperator:
    d = model.d
    mat = -1j * (left(model.H) - right(model.H)) + _dissipator(model.ops(), d)
    return Superoperator(mat=mat, dim=d)


def _L_S(blocks: ModelBlocks) -> Superoperator:
    d_S = blocks.split.d_S
    H_S = blocks.H.S
    mat = -1j * (left(H_S) - right(H_S)) + _dissipator([b.S for b in blocks.channels], d_S)
    return Superoperator(mat=mat, dim=d_S)


def _L_R(blocks: ModelBlocks) -> Superoperator:
    d_R = blocks.split.d_R
    H_R = blocks.H.R
    N = blocks.leak
    mat = -1j * (left(H_R) - right(H_R)) - 0.5 * (left(N) + right(N))
    for b in blocks.channels:
        CdC = dagger(b.R) @ b.R
        mat += sandwich(b.R, dagger(b.R)) - 0.5 * (left(CdC) + right(CdC))
    return Superoperator(mat=mat, dim=d_R)


def _L_R_adjoint(blocks: ModelBlocks) -> Superoperator:
    d_R = blocks.split.d_R
    H_R = blocks.H.R
    N = blocks.leak
    mat = 1j * (left(H_R) - right(H_R)) - 0.5 * (left(N) + right(N))
    for b in blocks.channels:
        CdC = dagger(b.R) @ b.R
        mat += sandwich(dagger(b.R), b.R) - 0.5 * (left(CdC) + right(CdC))
    return Superoperator(mat=mat, dim=d_R)


def generator_superop(model: SmeModel, split: SubspaceSplit, which: Generator) -> Superoperator:
    """Superoperator of L, L_S, L_R or the Hilbert-Schmidt adjoint L_R*."""
    which = Generator(which)
    if which is Generator.L:
        return lindblad_superop(model)
    blocks = adapted_blocks(model, split)
    if which is Generator.L_S:
        return _L_S(blocks)
    if which is Generator.L_R:
        return _L_R(blocks)
    return _L_R_adjoint(blocks)


def reduced_generators(model: SmeModel, split: SubspaceSplit) -> Tuple[Superoperator, Superoperator]:
    """(L_S, L_R) acting on adapted-basis blocks of size d_S and d_R."""
    blocks = adapted_blocks(model, split)
    return _L_S(blocks), _L_R(blocks)


def apply_reduced(model: SmeModel, split: SubspaceSplit, which: Generator, X: np.ndarray) -> np.ndarray:
    """Direct matrix-level application of L_S, L_R or L_R*, without building d^2 x d^2 matrices."""
    which = Generator(which)
    if which is Generator.L:
        return lindblad(model, X)

    blocks = adapted_blocks(model, split)
    if which is Generator.L_S:
        X = _as_square(X, "rho_S", split.d_S)
        H = blocks.H.S
        out = -1j * (H @ X - X @ H)
        for b in blocks.channels:
            CdC = dagger(b.S) @ b.S
            out += b.S @ X @ dagger(b.S) - 0.5 * (CdC @ X + X @ CdC)
        return out

    X = _as_square(X, "X_R", split.d_R)
    H = blocks.H.R
    N = blocks.leak
    sign = -1j if which is Generator.L_R else 1j
    out = sign * (H @ X - X @ H) - 0.5 * (N @ X + X @ N)
    for b in blocks.channels:
        CdC = dagger(b.R) @ b.R
        if which is Generator.L_R:
            out += b.R @ X @ dagger(b.R)
        else:
            out += dagger(b.R) @ X @ b.R
        out -= 0.5 * (CdC @ X + X @ CdC)
    return out


# =============================================================================
# MEAN FLOW
# =============================================================================

def mean_evolve(model: SmeModel, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho_hat(t) = exp(t L) rho0 via scipy's scaling-and-squaring Pade expm."""
    if t < 0:
        raise ModelValidationError(f"t must be >= 0, got {t}")
    rho0 = _as_square(rho0, "rho0", model.d)
    if t == 0:
        return rho0.copy()
    L = lindblad_superop(model)
    return hermitize(unvec(expm(t * L.mat) @ vec(rho0), model.d))


def semigroup(gen: Superoperator, t: float) -> np.ndarray:
    """exp(t gen) as a dim^2 x dim^2 matrix."""
    return expm(t * gen.mat)
