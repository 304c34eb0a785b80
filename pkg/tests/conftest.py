"""Shared fixtures: reference models and a generator of random invariant GAS targets."""

import os
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import unitary_group

from src.models.model_schema import load_model
from src.models.operators import ChannelKind, SmeModel, SubspaceSplit
from src.processors.rate_comparison import qubit_model
from src.processors.stability import alpha0, check_invariance

MODELS_DIR = Path(__file__).parent.parent / "config" / "models"

os.environ.setdefault("QSME_LOG_LEVEL", "WARNING")


def _ket(d, k):
    e = np.zeros(d, dtype=complex)
    e[k] = 1.0
    return e


def projector(d, k):
    e = _ket(d, k)
    return np.outer(e, e.conj())


def random_density(rng, d, rank=None):
    rank = rank or d
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit_left():
    return qubit_model(1.0, 0.5, 0.0)


@pytest.fixture
def qubit_right():
    return qubit_model(1.0, 2.0, 0.0)


@pytest.fixture
def three_level():
    return load_model(MODELS_DIR / "three_level.json")


@pytest.fixture
def three_level_driven():
    return load_model(MODELS_DIR / "three_level_driven.json")


@pytest.fixture
def three_level_two_dim_target(three_level):
    model, _ = three_level
    return model, SubspaceSplit.standard(3, 2)


def make_invariant_model(rng, d, d_S, n_diff=2, n_jump=1, rotate=True, max_tries=50):
    """
    Random model leaving H_S invariant: C_Q = 0 for every channel and
    H_P = -(i/2) sum C_S* C_P. Retries until alpha_0 > 1e-3. Jump channels get a
    full-rank R-block so SP holds.
    """
    d_R = d - d_S
    basis = unitary_group.rvs(d, random_state=rng) if rotate else np.eye(d, dtype=complex)
    split = SubspaceSplit(d=d, d_S=d_S, basis=basis)

    def cplx(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    for _ in range(max_tries):
        blocks = []
        for i in range(n_diff + n_jump):
            C = np.zeros((d, d), dtype=complex)
            C[:d_S, :d_S] = cplx(d_S, d_S)
            C[:d_S, d_S:] = cplx(d_S, d_R)
            C[d_S:, d_S:] = cplx(d_R, d_R) + (2.0 * np.eye(d_R) if i >= n_diff else 0.0)
            blocks.append(C)

        H = np.zeros((d, d), dtype=complex)
        A = cplx(d_S, d_S)
        H[:d_S, :d_S] = A + A.conj().T
        B = cplx(d_R, d_R)
        H[d_S:, d_S:] = B + B.conj().T
        H_P = sum(-0.5j * C[:d_S, :d_S].conj().T @ C[:d_S, d_S:] for C in blocks)
        H[:d_S, d_S:] = H_P
        H[d_S:, :d_S] = H_P.conj().T

        pairs = [(split.from_adapted(C), ChannelKind.DIFFUSIVE) for C in blocks[:n_diff]]
        pairs += [(split.from_adapted(C), ChannelKind.JUMP) for C in blocks[n_diff:]]
        H_orig = split.from_adapted(H)
        model = SmeModel.create(0.5 * (H_orig + H_orig.conj().T), pairs)
        if check_invariance(model, split).invariant and alpha0(model, split) > 1e-3:
            return model, split
    raise RuntimeError("could not draw an invariant GAS model")


def random_gas_models(rng, count):
    """`count` invariant GAS models with d in 2..4, random d_S and channel mix."""
    models = []
    while len(models) < count:
        d = int(rng.integers(2, 5))
        d_S = int(rng.integers(1, d))
        n_diff = int(rng.integers(0, 3))
        n_jump = int(rng.integers(0 if n_diff else 1, 2))
        models.append(make_invariant_model(rng, d, d_S, n_diff=n_diff, n_jump=n_jump))
    return models


@pytest.fixture
def invariant_model_factory():
    return make_invariant_model
