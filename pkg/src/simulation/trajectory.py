"""
Jump-diffusion quantum trajectories.

Each step first thins the jump channels (at most one jump per step, probability
1 - exp(-sum lambda_j dt), channel j with probability lambda_j / sum lambda); without a
jump the state moves by the normalized Kraus update
    M = I + dt (-iH - 1/2 sum_all C*C) + sum_diffusive C (dW + r dt),   rho <- M rho M* / tr,
which keeps rho positive and unit-trace up to rounding.

A batch of trajectories is marched together; trajectory `index` of seed `seed` always
draws from SeedSequence(seed, spawn_key=(index,)), so results do not depend on batching.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.models.operators import (
    ChannelKind,
    SmeModel,
    SubspaceSplit,
    adapted_blocks,
    dagger,
    hermitize,
    validate_density_matrix,
)
from src.models.run_config import SimConfig
from src.utils.errors import NumericalFailure
from src.utils.logger import get_logger

logger = get_logger(__name__)

RNG_BLOCK = 1024
INTENSITY_WARN = 0.1


# =============================================================================
# KERNEL
# =============================================================================

def _expect(ops: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """tr(op_k rho_b) -> (b, k), real part."""
    return np.real(np.einsum("kij,bji->bk", ops, rho))


def _trace(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("bii->b", rho))


class SmeKernel:
    """Precomputed operators for stepping a batch of states (shape (B, d, d))."""

    def __init__(self, model: SmeModel, dt: float):
        self.model = model
        self.dt = dt
        self.sqrt_dt = np.sqrt(dt)
        d = model.d

        self.C_diff = model.ops(ChannelKind.DIFFUSIVE)
        self.C_jump = model.ops(ChannelKind.JUMP)
        self.r_ops = self.C_diff + dagger(self.C_diff)
        self.jump_ops = dagger(self.C_jump) @ self.C_jump
        self.jump_channel_ids = np.asarray(model.jump_indices, dtype=int)

        all_ops = model.ops()
        drift = -1j * model.H - 0.5 * np.sum(dagger(all_ops) @ all_ops, axis=0)
        self.M0 = np.eye(d, dtype=complex) + dt * drift

    @property
    def n_diff(self) -> int:
        return self.C_diff.shape[0]

    @property
    def n_jump(self) -> int:
        return self.C_jump.shape[0]

    def intensities(self, rho: np.ndarray) -> np.ndarray:
        return np.maximum(_expect(self.jump_ops, rho), 0.0)

    def r_values(self, rho: np.ndarray) -> np.ndarray:
        return _expect(self.r_ops, rho)

    def advance(
        self, rho: np.ndarray, dW: np.ndarray, u: np.ndarray, t: float
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        One step for every state of the batch.

        Args:
            rho: (B, d, d) states
            dW: (B, n_diff) Wiener increments
            u: (B, 2) uniforms for jump occurrence and channel choice
            t: time at the start of the step (for error reporting)

        Returns:
            (rho_next, jumped, lam, r) with jumped the position among jump channels (-1 if none)
        """
        B = rho.shape[0]
        jumped = np.full(B, -1, dtype=int)
        lam = np.zeros((B, 0))
        out = np.empty_like(rho)

        if self.n_jump:
            lam = self.intensities(rho)
            total = lam.sum(axis=1)
            occurs = (total > 0) & (u[:, 0] < -np.expm1(-total * self.dt))
            if np.any(occurs):
                cum = np.cumsum(lam[occurs], axis=1)
                pick = np.sum(cum <= (u[occurs, 1] * total[occurs])[:, None], axis=1)
                pick = np.minimum(pick, self.n_jump - 1)
                jumped[occurs] = pick
                C = self.C_jump[pick]
                post = C @ rho[occurs] @ dagger(C)
                out[occurs] = hermitize(post / _trace(post)[:, None, None])

        r = self.r_values(rho) if self.n_diff else np.zeros((B, 0))
        stay = jumped < 0
        if np.any(stay):
            M = np.broadcast_to(self.M0, (int(stay.sum()),) + self.M0.shape).copy()
            if self.n_diff:
                M += np.einsum("kij,bk->bij", self.C_diff, dW[stay] + r[stay] * self.dt)
            post = M @ rho[stay] @ dagger(M)
            tr = _trace(post)
            if np.any(~np.isfinite(tr)) or np.any(tr <= 0):
                raise NumericalFailure("Kraus update produced non-positive trace", time=t)
            out[stay] = hermitize(post / tr[:, None, None])

        return out, jumped, lam, r


@dataclass
class StepRecord:
    jumped: Optional[int]
    dW: np.ndarray
    intensities: np.ndarray


def step(model: SmeModel, rho, dt: float, rng: np.random.Generator) -> Tuple[np.ndarray, StepRecord]:
    """Single state, single step; `jumped` is the model channel index or None."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    kernel = SmeKernel(model, dt)
    rho = validate_density_matrix(rho, model.d)
    u = rng.random((1, 2))
    dW = rng.standard_normal((1, kernel.n_diff)) * kernel.sqrt_dt
    nxt, jumped, lam, _ = kernel.advance(rho[None], dW, u, 0.0)
    channel = int(kernel.jump_channel_ids[jumped[0]]) if jumped[0] >= 0 else None
    return nxt[0], StepRecord(jumped=channel, dW=dW[0], intensities=lam[0])


# =============================================================================
# TRAJECTORIES
# =============================================================================

@dataclass
class Trajectory:
    seed: int
    index: int
    times: np.ndarray
    record_steps: np.ndarray = field(repr=False)
    v_series: Optional[np.ndarray] = field(default=None, repr=False)
    ln_v_series: Optional[np.ndarray] = field(default=None, repr=False)
    jump_events: List[Tuple[float, int]] = field(default_factory=list, repr=False)
    mw_series: Optional[np.ndarray] = field(default=None, repr=False)
    mj_series: Optional[np.ndarray] = field(default=None, repr=False)
    final_state: Optional[np.ndarray] = field(default=None, repr=False)
    states: Optional[np.ndarray] = field(default=None, repr=False)
    noise: Optional[np.ndarray] = field(default=None, repr=False)
    jumped: Optional[np.ndarray] = field(default=None, repr=False)
    dt: float = 0.0
    absorbed: bool = False
    absorbed_time: Optional[float] = None

    @property
    def final_v(self) -> float:
        return float(self.v_series[-1]) if self.v_series is not None else float("nan")

    @property
    def jump_count(self) -> int:
        return len(self.jump_events)

    def summary(self) -> dict:
        return {
            "index": self.index,
            "final_V": self.final_v,
            "jumps": self.jump_count,
            "absorbed": self.absorbed,
        }


def record_indices(n_steps: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


class _ReducedObservables:
    """
    Observables of the normalized R-block expressed on the full state:
    tr(X_R rho_R) = tr(U_R X_R U_R* rho), so r_R(rho_red) = tr(A rho) / V etc.
    """

    def __init__(self, model: SmeModel, split: SubspaceSplit):
        blocks = adapted_blocks(model, split)
        U = split.U_R

        def lift(X_R):
            return U @ X_R @ dagger(U)

        diff = blocks.of_kind(ChannelKind.DIFFUSIVE)
        jump = blocks.of_kind(ChannelKind.JUMP)
        d = split.d
        self.P_R = split.P_R
        self.r_R = np.stack([lift(b.R + dagger(b.R)) for b in diff]) if diff else np.zeros((0, d, d), complex)
        self.v_R = np.stack([lift(dagger(b.R) @ b.R) for b in jump]) if jump else np.zeros((0, d, d), complex)
        self.leak = lift(blocks.leak)

    def V(self, rho: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("ij,bji->b", self.P_R, rho))

    def evaluate(self, rho: np.ndarray, V: np.ndarray):
        """(r_R, v_R, tr L_R(rho_red)) per state; NaN where V <= 0."""
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(V > 0, 1.0 / V, np.nan)
            r_R = _expect(self.r_R, rho) * inv[:, None]
            v_R = _expect(self.v_R, rho) * inv[:, None]
            tr_LR = -np.real(np.einsum("ij,bji->b", self.leak, rho)) * inv
        return r_R, v_R, tr_LR


def _streams(seed: int, index: int) -> Tuple[np.random.Generator, np.random.Generator]:
    noise_ss, jump_ss = np.random.SeedSequence(seed, spawn_key=(index,)).spawn(2)
    return np.random.default_rng(noise_ss), np.random.default_rng(jump_ss)


def check_step_size(kernel: SmeKernel, rho0: np.ndarray) -> float:
    """dt * total jump intensity at rho0; logs a warning above 0.1."""
    if not kernel.n_jump:
        return 0.0
    load = float(kernel.intensities(rho0[None]).sum() * kernel.dt)
    if load > INTENSITY_WARN:
        logger.warning(f"dt * jump intensity = {load:.3g} > {INTENSITY_WARN} at rho0; thinning bias may be large")
    return load


def march(
    model: SmeModel,
    split: SubspaceSplit,
    rho0: np.ndarray,
    cfg: SimConfig,
    indices: Sequence[int],
    kernel: Optional[SmeKernel] = None,
) -> List[Trajectory]:
    """March the trajectories `indices` of seed cfg.seed together on the shared grid."""
    kernel = kernel or SmeKernel(model, cfg.dt)
    obs = _ReducedObservables(model, split)
    flags = cfg.record
    dt = cfg.dt
    n = cfg.n_steps
    B = len(indices)
    p, m = kernel.n_diff, kernel.n_jump

    steps = record_indices(n, cfg.record_stride)
    n_rec = len(steps)
    times = steps * dt

    rho = np.broadcast_to(rho0, (B,) + rho0.shape).astype(complex)
    streams = [_streams(cfg.seed, i) for i in indices]

    v_rec = np.empty((B, n_rec))
    mw_rec = np.zeros((B, n_rec))
    mj_rec = np.zeros((B, n_rec))
    mw = np.zeros(B)
    mj = np.zeros(B)
    states = np.empty((B, n + 1) + rho0.shape, dtype=complex) if flags.full_state else None
    noise = np.zeros((B, n, p)) if flags.full_state else None
    jumped_all = np.full((B, n), -1, dtype=int) if flags.full_state else None
    events: List[List[Tuple[float, int]]] = [[] for _ in range(B)]
    absorbed_at = np.full(B, np.nan)

    V = obs.V(rho)
    v_rec[:, 0] = V
    if states is not None:
        states[:, 0] = rho
    absorbed_at[V < cfg.v_floor] = 0.0
    rec = 1

    normals = uniforms = None
    for k in range(n):
        j = k % RNG_BLOCK
        if j == 0:
            size = min(RNG_BLOCK, n - k)
            normals = np.stack([g[0].standard_normal((size, p)) for g in streams]) if p else np.zeros((B, size, 0))
            uniforms = np.stack([g[1].random((size, 2)) for g in streams]) if m else np.ones((B, size, 2))
        t = k * dt
        dW = normals[:, j] * kernel.sqrt_dt

        rho_next, jumped, lam, r = kernel.advance(rho, dW, uniforms[:, j], t)

        if flags.martingale_terms:
            r_R, v_R, _ = obs.evaluate(rho, V)
            stay = jumped < 0
            if p:
                inc = np.sum((r_R - r) * dW, axis=1)
                mw += np.where(stay & np.isfinite(inc), inc, 0.0)
            if m:
                dN = np.zeros((B, m))
                hit = ~stay
                dN[hit, jumped[hit]] = 1.0
                with np.errstate(divide="ignore", invalid="ignore"):
                    F = np.log(v_R / lam)
                term = np.where(np.isfinite(F), F * (dN - lam * dt), 0.0)
                mj += term.sum(axis=1)

        for b in np.flatnonzero(jumped >= 0):
            events[b].append(((k + 1) * dt, int(kernel.jump_channel_ids[jumped[b]])))
        if noise is not None:
            noise[:, k] = dW
            jumped_all[:, k] = jumped

        rho = rho_next
        V = obs.V(rho)
        newly = np.isnan(absorbed_at) & (V < cfg.v_floor)
        absorbed_at[newly] = (k + 1) * dt
        if states is not None:
            states[:, k + 1] = rho
        if rec < n_rec and steps[rec] == k + 1:
            v_rec[:, rec] = V
            mw_rec[:, rec] = mw
            mj_rec[:, rec] = mj
            rec += 1

    with np.errstate(divide="ignore"):
        ln_v = np.log(np.maximum(v_rec, 0.0))

    out = []
    for b, index in enumerate(indices):
        absorbed = not np.isnan(absorbed_at[b])
        out.append(
            Trajectory(
                seed=cfg.seed,
                index=int(index),
                times=times,
                record_steps=steps,
                v_series=v_rec[b] if flags.v else None,
                ln_v_series=ln_v[b] if flags.ln_v else None,
                jump_events=events[b] if flags.jump_times else [],
                mw_series=mw_rec[b] if flags.martingale_terms else None,
                mj_series=mj_rec[b] if flags.martingale_terms else None,
                final_state=rho[b].copy(),
                states=states[b] if states is not None else None,
                noise=noise[b] if noise is not None else None,
                jumped=jumped_all[b] if jumped_all is not None else None,
                dt=dt,
                absorbed=absorbed,
                absorbed_time=float(absorbed_at[b]) if absorbed else None,
            )
        )
    return out


def simulate(
    model: SmeModel,
    split: SubspaceSplit,
    rho0,
    cfg: Optional[SimConfig] = None,
    index: int = 0,
) -> Trajectory:
    """One trajectory on the fixed grid 0, dt, ..., t_final."""
    cfg = cfg or SimConfig()
    rho0 = validate_density_matrix(rho0, model.d)
    kernel = SmeKernel(model, cfg.dt)
    check_step_size(kernel, rho0)
    traj = march(model, split, rho0, cfg, [index], kernel)[0]
    if traj.absorbed:
        logger.debug(f"trajectory {index} absorbed at t={traj.absorbed_time:.6g}")
    return traj
