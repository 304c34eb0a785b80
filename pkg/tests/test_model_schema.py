"""Tests for model-file parsing and serialization."""

import json

import numpy as np
import pytest
from scipy.stats import unitary_group

from src.models.model_schema import load_model, matrix_to_json, parse_model, serialize_model
from src.models.operators import ChannelKind
from src.models.run_config import Tolerances
from src.utils.errors import ModelValidationError


def _model_text(H, channels, d_S=1, basis=None):
    payload = {
        "dim": len(H),
        "d_S": d_S,
        "H": matrix_to_json(np.asarray(H, dtype=complex)),
        "channels": [{"matrix": matrix_to_json(np.asarray(C, dtype=complex)), "kind": kind} for C, kind in channels],
    }
    if basis is not None:
        payload["basis"] = matrix_to_json(basis)
    return json.dumps(payload)


QUBIT_CHANNELS = [([[0, 1], [0, 0]], "diffusive"), ([[0.5, 0], [0, 0]], "diffusive")]


def test_parse_qubit_model():
    model, split = parse_model(_model_text(np.zeros((2, 2)), QUBIT_CHANNELS))
    assert model.d == 2
    assert model.p == 1
    assert model.n == 1
    assert split.d_S == 1 and split.d_R == 1
    np.testing.assert_allclose(model.channels[1].op, np.diag([0.5, 0]))


def test_three_level_with_two_dim_target():
    H = np.zeros((3, 3))
    C0 = np.zeros((3, 3))
    C0[0, 2] = 1.0
    text = _model_text(H, [(C0, "diffusive"), (np.diag([1, 1, 0.5]), "jump")], d_S=2)
    model, split = parse_model(text)
    assert split.d_S == 2
    assert model.diffusive_indices == [0]
    assert model.jump_indices == [1]


def test_channels_grouped_diffusive_first():
    H = np.zeros((2, 2))
    text = _model_text(H, [(np.eye(2), "jump"), (np.diag([1, 0]), "diffusive")])
    model, _ = parse_model(text)
    assert [c.kind for c in model.channels] == [ChannelKind.DIFFUSIVE, ChannelKind.JUMP]
    np.testing.assert_allclose(model.channels[0].op, np.diag([1, 0]))


def test_non_hermitian_hamiltonian_rejected():
    H = np.array([[0, 1], [0, 0]])
    with pytest.raises(ModelValidationError):
        parse_model(_model_text(H, QUBIT_CHANNELS))


def test_hamiltonian_tolerance_comes_from_settings():
    H = np.array([[0, 1], [1 + 1e-9, 0]], dtype=complex)
    text = _model_text(H, QUBIT_CHANNELS)
    with pytest.raises(ModelValidationError, match="not Hermitian"):
        parse_model(text)

    model, _ = parse_model(text, Tolerances(hamiltonian=1e-3))
    np.testing.assert_array_equal(model.H, model.H.conj().T)
    assert model.H[0, 1].real == pytest.approx(1 + 0.5e-9, abs=1e-15)


def test_unitarity_tolerance_comes_from_settings(rng):
    basis = unitary_group.rvs(2, random_state=rng) * (1 + 1e-8)
    text = _model_text(np.zeros((2, 2)), QUBIT_CHANNELS, basis=basis)
    with pytest.raises(ModelValidationError, match="not unitary"):
        parse_model(text)

    _, split = parse_model(text, Tolerances(unitarity=1e-6))
    np.testing.assert_allclose(split.basis.conj().T @ split.basis, np.eye(2), atol=1e-14)


def test_load_model_passes_tolerances(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(_model_text(np.array([[0, 1e-9], [0, 0]]), QUBIT_CHANNELS))
    with pytest.raises(ModelValidationError):
        load_model(path)
    model, _ = load_model(path, Tolerances(hamiltonian=1e-6))
    assert model.d == 2


def test_malformed_json_rejected():
    with pytest.raises(ModelValidationError, match="malformed JSON"):
        parse_model('{"dim": 2, "d_S": 1,')


@pytest.mark.parametrize("d_S", [0, 2])
def test_d_S_out_of_range(d_S):
    with pytest.raises(ModelValidationError):
        parse_model(_model_text(np.zeros((2, 2)), QUBIT_CHANNELS, d_S=d_S))


def test_dimension_mismatch():
    text = _model_text(np.zeros((2, 2)), [(np.eye(3), "diffusive")])
    with pytest.raises(ModelValidationError, match="dimension mismatch"):
        parse_model(text)


def test_unknown_channel_kind():
    text = _model_text(np.zeros((2, 2)), [(np.eye(2), "poisson")])
    with pytest.raises(ModelValidationError):
        parse_model(text)


def test_empty_channel_list():
    text = _model_text(np.zeros((2, 2)), [])
    with pytest.raises(ModelValidationError):
        parse_model(text)


def test_non_unitary_basis_rejected():
    text = _model_text(np.zeros((2, 2)), QUBIT_CHANNELS, basis=np.array([[1, 0], [0, 2]], dtype=complex))
    with pytest.raises(ModelValidationError, match="unitary"):
        parse_model(text)


def test_entries_must_be_pairs():
    raw = json.loads(_model_text(np.zeros((2, 2)), QUBIT_CHANNELS))
    raw["H"][0][0] = [0.0]
    with pytest.raises(ModelValidationError):
        parse_model(json.dumps(raw))


def test_serialize_then_parse_keeps_model():
    rng = np.random.default_rng(3)
    basis = unitary_group.rvs(3, random_state=rng)
    C = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = rng.normal(size=(3, 3))
    H = H + H.T
    model, split = parse_model(_model_text(H, [(C, "diffusive"), (np.eye(3), "jump")], d_S=1, basis=basis))

    again, split_again = parse_model(serialize_model(model, split))
    np.testing.assert_allclose(again.H, model.H, atol=1e-14)
    for a, b in zip(again.channels, model.channels):
        assert a.kind is b.kind
        np.testing.assert_allclose(a.op, b.op, atol=1e-14)
    np.testing.assert_allclose(split_again.basis, split.basis, atol=1e-14)


def test_identity_basis_not_serialized(qubit_left):
    model, split = qubit_left
    assert "basis" not in json.loads(serialize_model(model, split))
