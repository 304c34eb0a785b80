"""
Alpha-function and its minimum alpha_1 over I_S(H) x S(H_R).

alpha(rho, rho_R) = 1/2 |r(rho) - r_R(rho_R)|^2
                    + sum_jump [v_R - v + v ln(v / v_R)]     (0 ln 0 = 0)
and alpha = 0 as soon as one jump channel has v_R(rho_R) = 0.

The jump part is scipy.special.kl_div(v, v_R) channel by channel.
All diffusive channels enter r, including channel 0.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import kl_div
from scipy.stats import qmc

from src.models.operators import (
    ChannelKind,
    SmeModel,
    SubspaceSplit,
    adapted_blocks,
    block_decompose,
    dagger,
    validate_density_matrix,
)
from src.models.run_config import OptimizerConfig, Tolerances
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)

GRID_MAX_PRODUCT = 4


@dataclass(frozen=True)
class AlphaArguments:
    r_vec: np.ndarray
    r_R_vec: np.ndarray
    v_vec: np.ndarray
    v_R_vec: np.ndarray


def _expect(ops: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Real parts of tr(op_k rho) for ops (k, n, n) and rho (..., n, n) -> (..., k)."""
    return np.real(np.einsum("kij,...ji->...k", ops, rho))


class AlphaOperators:
    """
    Observables entering the alpha-function, built once per (model, split).

    Full-basis operators evaluate r(rho), v(rho) for any rho on H; S-block operators
    evaluate the same quantities for rho = diag(rho_S, 0); R-block operators give
    r_R(rho_R), v_R(rho_R) in adapted coordinates of H_R.
    """

    def __init__(self, model: SmeModel, split: SubspaceSplit):
        self.model = model
        self.split = split
        blocks = adapted_blocks(model, split)

        diff = model.ops(ChannelKind.DIFFUSIVE)
        jump = model.ops(ChannelKind.JUMP)
        self.r_full = diff + dagger(diff)
        self.v_full = dagger(jump) @ jump

        diff_blocks = blocks.of_kind(ChannelKind.DIFFUSIVE)
        jump_blocks = blocks.of_kind(ChannelKind.JUMP)
        k = split.d_S

        def _stack(mats, n):
            return np.stack(mats) if mats else np.zeros((0, n, n), dtype=complex)

        self.r_R = _stack([b.R + dagger(b.R) for b in diff_blocks], split.d_R)
        self.v_R = _stack([dagger(b.R) @ b.R for b in jump_blocks], split.d_R)
        self.r_S = _stack([b.S + dagger(b.S) for b in diff_blocks], k)
        # (C*C) restricted to the S-block: C_S*C_S + C_Q*C_Q
        self.v_S = _stack([block_decompose(dagger(C) @ C, split).S for C in jump], k)

    def sp_margin(self) -> float:
        """min over jump channels of the smallest eigenvalue of C_R*C_R (inf without jumps)."""
        if not len(self.v_R):
            return float("inf")
        return float(min(np.linalg.eigvalsh(B)[0] for B in self.v_R))

    def arguments(self, rho: np.ndarray, rho_R: np.ndarray) -> AlphaArguments:
        return AlphaArguments(
            r_vec=_expect(self.r_full, rho),
            r_R_vec=_expect(self.r_R, rho_R),
            v_vec=_expect(self.v_full, rho),
            v_R_vec=_expect(self.v_R, rho_R),
        )

    def value(self, rho: np.ndarray, rho_R: np.ndarray) -> float:
        return alpha_from_arguments(self.arguments(rho, rho_R))

    def value_S(self, rho_S: np.ndarray, rho_R: np.ndarray) -> np.ndarray:
        """Vectorized alpha for rho = diag(rho_S, 0); broadcasts over leading axes."""
        return _alpha_values(
            _expect(self.r_S, rho_S),
            _expect(self.r_R, rho_R),
            _expect(self.v_S, rho_S),
            _expect(self.v_R, rho_R),
        )


def _alpha_values(r, r_R, v, v_R) -> np.ndarray:
    diff = 0.5 * np.sum((r - r_R) ** 2, axis=-1)
    v = np.maximum(v, 0.0)
    v_R = np.maximum(v_R, 0.0)
    r_dead = np.any(v_R <= 0.0, axis=-1) if v_R.shape[-1] else np.zeros(np.shape(diff), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        jump = np.sum(kl_div(v, v_R), axis=-1)
    return np.where(r_dead, 0.0, diff + jump)


def alpha_from_arguments(args: AlphaArguments) -> float:
    return float(_alpha_values(args.r_vec, args.r_R_vec, args.v_vec, args.v_R_vec))


def alpha_fn(model: SmeModel, split: SubspaceSplit, rho, rho_R) -> float:
    """alpha(rho, rho_R) for rho in S(H) (original basis) and rho_R in S(H_R) (adapted coordinates)."""
    rho = validate_density_matrix(rho, model.d)
    rho_R = validate_density_matrix(rho_R, split.d_R)
    return AlphaOperators(model, split).value(rho, rho_R)


# =============================================================================
# PARAMETRIZATION
# =============================================================================

def n_params(dim: int) -> int:
    """Real parameters of the factor A in rho = AA*/tr(AA*); singletons need none."""
    return 0 if dim == 1 else 2 * dim * dim


def factor_state(x: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1), dtype=complex)
    n = dim * dim
    A = x[:n].reshape(dim, dim) + 1j * x[n:].reshape(dim, dim)
    M = A @ dagger(A)
    tr = np.real(np.trace(M))
    if tr <= 1e-300:
        return np.eye(dim, dtype=complex) / dim
    return M / tr


def bloch_ball(m: int) -> np.ndarray:
    """Qubit states on an (r, theta, phi) grid with m points per axis; includes r = 1 and the poles."""
    r = np.linspace(0.0, 1.0, m)
    theta = np.linspace(0.0, np.pi, m)
    phi = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
    R, T, P = np.meshgrid(r, theta, phi, indexing="ij")
    x = (R * np.sin(T) * np.cos(P)).ravel()
    y = (R * np.sin(T) * np.sin(P)).ravel()
    z = (R * np.cos(T)).ravel()
    states = np.empty((x.size, 2, 2), dtype=complex)
    states[:, 0, 0] = 0.5 * (1 + z)
    states[:, 1, 1] = 0.5 * (1 - z)
    states[:, 0, 1] = 0.5 * (x - 1j * y)
    states[:, 1, 0] = 0.5 * (x + 1j * y)
    return states


# =============================================================================
# ALPHA_1
# =============================================================================

@dataclass
class Alpha1Result:
    value: float
    rho: Optional[np.ndarray] = field(default=None, repr=False)
    rho_R: Optional[np.ndarray] = field(default=None, repr=False)
    optimizer_value: Optional[float] = None
    grid_value: Optional[float] = None
    starts: int = 0
    iterations: int = 0
    converged: bool = True
    unconverged_starts: int = 0

    def to_dict(self) -> Dict:
        return {
            "value": self.value,
            "optimizer_value": self.optimizer_value,
            "grid_value": self.grid_value,
            "starts": self.starts,
            "iterations": self.iterations,
            "converged": self.converged,
            "unconverged_starts": self.unconverged_starts,
        }


@dataclass
class _StartResult:
    index: int
    value: float
    x: np.ndarray
    iterations: int
    success: bool


def factor_grid(dim: int, n: int) -> np.ndarray:
    """
    Deterministic states on a dim-dimensional factor, about n of them.

    Qubits use the Bloch-ball grid; larger factors use an unscrambled Halton
    sequence for A in rho = AA*/tr(AA*), plus the basis projectors.
    """
    if dim == 1:
        return np.ones((1, 1, 1), dtype=complex)
    if dim == 2:
        return bloch_ball(max(2, int(round(n ** (1.0 / 3.0)))))
    points = 2.0 * qmc.Halton(d=n_params(dim), scramble=False).random(max(n, 1)) - 1.0
    states = [factor_state(x, dim) for x in points]
    states.extend(np.diag(np.eye(dim)[k]).astype(complex) for k in range(dim))
    return np.stack(states)


def _grid_oracle(ops: AlphaOperators, budget: int) -> Tuple[float, np.ndarray, np.ndarray]:
    factors = [dim for dim in (ops.split.d_S, ops.split.d_R) if dim > 1]
    per_factor = int(round(budget ** (1.0 / max(len(factors), 1))))

    S_states = factor_grid(ops.split.d_S, per_factor)
    R_states = factor_grid(ops.split.d_R, per_factor)

    values = _alpha_values(
        _expect(ops.r_S, S_states)[:, None, :],
        _expect(ops.r_R, R_states)[None, :, :],
        _expect(ops.v_S, S_states)[:, None, :],
        _expect(ops.v_R, R_states)[None, :, :],
    )
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return float(values[i, j]), S_states[i], R_states[j]


def alpha1(
    model: SmeModel,
    split: SubspaceSplit,
    opt_cfg: Optional[OptimizerConfig] = None,
    tolerances: Optional[Tolerances] = None,
    max_workers: Optional[int] = None,
) -> Alpha1Result:
    """
    alpha_1 = min alpha(diag(rho_S, 0), rho_R) by multi-start local search plus a grid oracle.

    Returns 0 with no argmin when SP fails. The reported value is alpha_fn at the returned argmin.
    """
    opt_cfg = opt_cfg or OptimizerConfig()
    tolerances = tolerances or Tolerances()

    ops = AlphaOperators(model, split)
    if ops.sp_margin() <= tolerances.sp:
        logger.info("SP fails: alpha_1 = 0 by definition")
        return Alpha1Result(value=0.0)

    d_S, d_R = split.d_S, split.d_R
    n_S, n_R = n_params(d_S), n_params(d_R)

    def unpack(x):
        return factor_state(x[:n_S], d_S), factor_state(x[n_S:], d_R)

    def objective(x):
        rho_S, rho_R = unpack(x)
        return float(ops.value_S(rho_S, rho_R))

    if n_S + n_R == 0:
        # both factors are singletons
        starts = [_StartResult(0, objective(np.zeros(0)), np.zeros(0), 0, True)]
    else:
        def run_start(index: int) -> _StartResult:
            rng = np.random.default_rng([opt_cfg.seed, index])
            x0 = rng.normal(size=n_S + n_R)
            res = minimize(objective, x0, method=opt_cfg.method, options={"maxiter": opt_cfg.max_iter})
            return _StartResult(index, float(res.fun), np.asarray(res.x), int(getattr(res, "nit", 0)), bool(res.success))

        starts = ordered_map(run_start, range(opt_cfg.starts), max_workers)

    # min value, ties broken by lowest start index
    best = min(starts, key=lambda s: (s.value, s.index))
    best_S, best_R = unpack(best.x)
    unconverged = sum(1 for s in starts if not s.success)
    if not best.success:
        logger.warning(f"alpha_1: best start {best.index} did not converge in {opt_cfg.max_iter} iterations")
    elif unconverged:
        logger.debug(f"alpha_1: {unconverged}/{len(starts)} starts unconverged")

    grid_value = None
    if d_S * d_R <= GRID_MAX_PRODUCT:
        grid_value, grid_S, grid_R = _grid_oracle(ops, opt_cfg.grid_points)
        if grid_value < best.value:
            logger.info(f"alpha_1: grid oracle {grid_value:.6g} below optimizer {best.value:.6g}")
            best_S, best_R = grid_S, grid_R

    rho = split.embed_S(best_S)
    value = ops.value(rho, best_R)

    return Alpha1Result(
        value=value,
        rho=rho,
        rho_R=best_R,
        optimizer_value=best.value,
        grid_value=grid_value,
        starts=len(starts),
        iterations=sum(s.iterations for s in starts),
        converged=best.success,
        unconverged_starts=unconverged,
    )
