"""
CSV / JSON artifacts.

Trajectory CSV: t,V,lnV,jumped_channel,mw,mj   (jumped_channel empty without a jump;
jumps inside one stride window are joined with ';')
Ensemble CSV:   t,mean_V,stderr_V,n
Floats use 17 significant digits; JSON uses sorted keys and carries no timestamps.
"""

import json
import os
from typing import Dict, List

import numpy as np
import pandas as pd

from src.processors.schemas import ArtifactGate
from src.simulation.ensemble import Ensemble
from src.simulation.trajectory import Trajectory
from src.utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"


def _jump_column(traj: Trajectory) -> List[str]:
    """Channels that jumped in (previous record, this record], keyed by grid step."""
    cells: List[List[str]] = [[] for _ in traj.record_steps]
    if traj.dt > 0:
        for time, channel in traj.jump_events:
            k = int(round(time / traj.dt))
            row = int(np.searchsorted(traj.record_steps, k, side="left"))
            if row < len(cells):
                cells[row].append(str(channel))
    return [";".join(c) for c in cells]


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    n = len(traj.times)
    nan = np.full(n, np.nan)
    v = traj.v_series if traj.v_series is not None else nan
    with np.errstate(divide="ignore"):
        ln_v = traj.ln_v_series if traj.ln_v_series is not None else np.log(np.maximum(v, 0.0))
    return pd.DataFrame(
        {
            "t": np.asarray(traj.times, dtype=float),
            "V": v,
            "lnV": ln_v,
            "jumped_channel": _jump_column(traj),
            "mw": traj.mw_series if traj.mw_series is not None else nan,
            "mj": traj.mj_series if traj.mj_series is not None else nan,
        }
    )


def ensemble_frame(ens: Ensemble) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": np.asarray(ens.times, dtype=float),
            "mean_V": ens.mean_v,
            "stderr_V": ens.stderr_v,
            "n": np.full(len(ens.times), ens.n, dtype=int),
        }
    )


def _write_csv(df: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def save_trajectory(traj: Trajectory, path: str) -> str:
    df = trajectory_frame(traj)
    ArtifactGate.enforce(df, ArtifactGate.TrajectoryTable, os.path.basename(path))
    return _write_csv(df, path)


def save_ensemble(ens: Ensemble, path: str) -> str:
    df = ensemble_frame(ens)
    ArtifactGate.enforce(df, ArtifactGate.EnsembleTable, os.path.basename(path))
    return _write_csv(df, path)


def save_json(payload: Dict, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"💾 Saved {path}")
    return path
