"""Tests for CSV / JSON artifacts and their data contracts."""

import json

import numpy as np
import pandas as pd
import pytest

from conftest import projector
from src.models.operators import ChannelKind, SmeModel, SubspaceSplit
from src.models.run_config import SimConfig
from src.processors.schemas import ArtifactGate
from src.simulation.ensemble import ensemble
from src.simulation.trajectory import simulate
from src.storage.artifact_store import (
    ensemble_frame,
    save_ensemble,
    save_json,
    save_trajectory,
    trajectory_frame,
)


@pytest.fixture
def jump_trajectory():
    model = SmeModel.create(
        np.zeros((2, 2)),
        [(np.array([[0, 1], [0, 0]]), ChannelKind.DIFFUSIVE), (np.diag([1.0, 2.0]), ChannelKind.JUMP)],
    )
    split = SubspaceSplit.standard(2, 1)
    return simulate(model, split, projector(2, 1), SimConfig(t_final=2.0, dt=1e-3, record_stride=10, seed=4))


def test_trajectory_csv_layout(tmp_path, jump_trajectory):
    path = save_trajectory(jump_trajectory, str(tmp_path / "trajectory.csv"))
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "t,V,lnV,jumped_channel,mw,mj"
    assert len(lines) == 1 + len(jump_trajectory.times)
    assert lines[1].startswith("0,1,0,")


def test_jump_column_marks_recorded_rows(jump_trajectory):
    df = trajectory_frame(jump_trajectory)
    marked = df[df["jumped_channel"] != ""]
    assert len(marked) > 0
    assert set(";".join(marked["jumped_channel"]).split(";")) == {"1"}
    n_listed = sum(len(cell.split(";")) for cell in marked["jumped_channel"])
    assert n_listed == jump_trajectory.jump_count


def test_full_precision_floats(tmp_path, qubit_left):
    model, split = qubit_left
    traj = simulate(model, split, projector(2, 1), SimConfig(t_final=0.05, dt=1e-3, seed=3))
    path = save_trajectory(traj, str(tmp_path / "t.csv"))
    df = pd.read_csv(path, float_precision="round_trip")
    np.testing.assert_array_equal(df["V"].to_numpy(), traj.v_series)


def test_ensemble_csv(tmp_path, qubit_left):
    model, split = qubit_left
    ens = ensemble(model, split, projector(2, 1), SimConfig(n_traj=4, t_final=0.1, dt=1e-3, record_stride=10))
    path = save_ensemble(ens, str(tmp_path / "out" / "ensemble.csv"))
    df = pd.read_csv(path)
    assert list(df.columns) == ["t", "mean_V", "stderr_V", "n"]
    assert (df["n"] == 4).all()
    assert len(df) == 11


def test_contracts_accept_valid_frames(jump_trajectory, qubit_left):
    assert ArtifactGate.enforce(trajectory_frame(jump_trajectory), ArtifactGate.TrajectoryTable, "trajectory")
    model, split = qubit_left
    ens = ensemble(model, split, projector(2, 1), SimConfig(n_traj=2, t_final=0.01, dt=1e-3))
    assert ArtifactGate.enforce(ensemble_frame(ens), ArtifactGate.EnsembleTable, "ensemble")


def test_contract_flags_bad_V(jump_trajectory):
    df = trajectory_frame(jump_trajectory)
    df.loc[3, "V"] = 1.5
    assert not ArtifactGate.enforce(df, ArtifactGate.TrajectoryTable, "trajectory")


def test_json_is_sorted(tmp_path):
    path = save_json({"b": 1, "a": {"d": 2, "c": 3}}, str(tmp_path / "x.json"))
    with open(path, encoding="utf-8") as f:
        text = f.read()
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"c"') < text.index('"d"')
    assert json.loads(text) == {"a": {"c": 3, "d": 2}, "b": 1}
