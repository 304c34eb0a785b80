"""
Seeded trajectory ensembles.

Trajectories are split into fixed batches (cfg.batch_size), batches run on the thread
pool, and per-batch mean / M2 of V are merged in batch order, so the aggregate is the
same whatever the worker count.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

import numpy as np

from src.models.operators import SmeModel, SubspaceSplit, validate_density_matrix
from src.models.run_config import SimConfig
from src.simulation.trajectory import SmeKernel, Trajectory, check_step_size, march, record_indices
from src.utils.errors import InsufficientDataError
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)


@dataclass
class Ensemble:
    times: np.ndarray
    mean_v: np.ndarray
    stderr_v: np.ndarray
    n: int
    seed: int
    indices: List[int]
    trajectories: Optional[List[Trajectory]] = field(default=None, repr=False)
    reductions: Optional[List[Any]] = field(default=None, repr=False)
    absorbed: int = 0

    @property
    def seeds(self) -> List[dict]:
        return [{"seed": self.seed, "index": i} for i in self.indices]


@dataclass
class _BatchResult:
    count: int
    mean: np.ndarray
    m2: np.ndarray
    absorbed: int
    trajectories: Optional[List[Trajectory]]
    reductions: Optional[List[Any]]


def _merge(a: _BatchResult, b: _BatchResult) -> _BatchResult:
    """Chan et al. pairwise update of (count, mean, M2)."""
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + delta**2 * (a.count * b.count / n)
    return _BatchResult(n, mean, m2, a.absorbed + b.absorbed, None, None)


def ensemble(
    model: SmeModel,
    split: SubspaceSplit,
    rho0,
    cfg: Optional[SimConfig] = None,
    reducer: Optional[Callable[[Trajectory], Any]] = None,
    keep_trajectories: bool = True,
    max_workers: Optional[int] = None,
) -> Ensemble:
    """
    Run cfg.n_traj trajectories (indices 0..n_traj-1) and aggregate V on the grid.

    Args:
        reducer: applied to every trajectory inside its batch; results kept in index order
        keep_trajectories: drop full series after reduction when False
    """
    cfg = cfg or SimConfig()
    if cfg.n_traj < 2:
        raise InsufficientDataError(f"an ensemble needs n_traj >= 2, got {cfg.n_traj}")
    if not cfg.record.v:
        cfg = cfg.model_copy(update={"record": cfg.record.model_copy(update={"v": True})})

    rho0 = validate_density_matrix(rho0, model.d)
    kernel = SmeKernel(model, cfg.dt)
    check_step_size(kernel, rho0)

    indices = list(range(cfg.n_traj))
    batches = [indices[i : i + cfg.batch_size] for i in range(0, len(indices), cfg.batch_size)]
    logger.info(f"Ensemble: {cfg.n_traj} trajectories, {len(batches)} batches, {cfg.n_steps} steps each")

    def run_batch(batch: List[int]) -> _BatchResult:
        trajs = march(model, split, rho0, cfg, batch, kernel)
        V = np.stack([t.v_series for t in trajs])
        mean = V.mean(axis=0)
        m2 = ((V - mean) ** 2).sum(axis=0)
        reductions = [reducer(t) for t in trajs] if reducer else None
        absorbed = sum(1 for t in trajs if t.absorbed)
        return _BatchResult(len(trajs), mean, m2, absorbed, trajs if keep_trajectories else None, reductions)

    results = ordered_map(run_batch, batches, max_workers)

    total = results[0]
    for res in results[1:]:
        total = _merge(total, res)

    n = total.count
    stderr = np.sqrt(total.m2 / (n - 1)) / np.sqrt(n)
    if total.absorbed:
        logger.warning(f"{total.absorbed}/{n} trajectories fell below v_floor={cfg.v_floor:g}")

    trajectories = [t for r in results for t in r.trajectories] if keep_trajectories else None
    reductions = [x for r in results for x in r.reductions] if reducer else None

    return Ensemble(
        times=record_indices(cfg.n_steps, cfg.record_stride) * cfg.dt,
        mean_v=total.mean,
        stderr_v=stderr,
        n=n,
        seed=cfg.seed,
        indices=indices,
        trajectories=trajectories,
        reductions=reductions,
        absorbed=total.absorbed,
    )
