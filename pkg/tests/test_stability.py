"""Tests for the structural checks and rates of the stability analysis."""

import numpy as np
import pytest

from conftest import random_gas_models
from src.models.operators import ChannelKind, SmeModel, SubspaceSplit
from src.models.run_config import OptimizerConfig, Settings
from src.models.superop import Generator, apply_reduced, generator_superop, superop_matrix
from src.processors.rate_comparison import qubit_model, qubit_reference
from src.processors.stability import (
    SCHEMA_VERSION,
    add_nd_channel,
    alpha0,
    alpha0_prime,
    analyze,
    beta0,
    check_gas,
    check_invariance,
    check_nd,
    check_sp,
    mean_invariance_probe,
)
from src.processors.alpha_optimizer import alpha1
from src.utils.errors import StabilityPreconditionError

FAST = Settings(optimizer=OptimizerConfig(starts=8))


def _raising_qubit():
    """C = |R><S| moves population out of H_S."""
    return (
        SmeModel.create(np.zeros((2, 2)), [(np.array([[0, 0], [1, 0]]), ChannelKind.DIFFUSIVE)]),
        SubspaceSplit.standard(2, 1),
    )


# =============================================================================
# INVARIANCE
# =============================================================================

class TestInvariance:

    def test_block_diagonal_model(self):
        model = SmeModel.create(np.diag([1.0, 2.0, 3.0]), [(np.diag([1.0, 2.0, 0.5]), ChannelKind.DIFFUSIVE)])
        invariant, residuals = check_invariance(model, SubspaceSplit.standard(3, 1))
        assert invariant
        assert residuals["max_C_Q"] == 0.0

    def test_qubit(self, qubit_left):
        assert check_invariance(*qubit_left).invariant

    def test_q_block_breaks_invariance(self):
        check = check_invariance(*_raising_qubit())
        assert not check.invariant
        assert check.q_residual == pytest.approx(1.0)

    def test_hamiltonian_coupling_breaks_invariance(self):
        model = SmeModel.create(np.array([[0, 1], [1, 0]]), [(np.diag([1.0, 0.0]), ChannelKind.DIFFUSIVE)])
        check = check_invariance(model, SubspaceSplit.standard(2, 1))
        assert not check.invariant
        assert check.p_residual == pytest.approx(1.0)

    def test_random_invariant_models(self, rng, invariant_model_factory):
        for d, d_S in [(2, 1), (3, 2), (4, 1), (4, 3)]:
            model, split = invariant_model_factory(rng, d, d_S)
            assert check_invariance(model, split).invariant

    def test_mean_flow_probe(self, qubit_left):
        assert mean_invariance_probe(*qubit_left) < 1e-10
        assert mean_invariance_probe(*_raising_qubit()) > 1e-3


# =============================================================================
# SP / ALPHA_0 / GAS
# =============================================================================

def test_sp_without_jump_channels(qubit_left):
    assert check_sp(*qubit_left)


def test_sp_with_full_rank_jump(three_level):
    assert check_sp(*three_level)


def test_sp_fails_on_singular_jump():
    model = SmeModel.create(np.zeros((3, 3)), [(np.diag([1.0, 1.0, 0.0]), ChannelKind.JUMP)])
    assert not check_sp(model, SubspaceSplit.standard(3, 1))


@pytest.mark.parametrize("l_P,l_S,l_R", [(1.0, 0.5, 0.0), (1.0, 2.0, 0.0), (0.7, 0.3, -0.2), (2.0, 1.0, 1.0)])
def test_qubit_rates_match_closed_form(l_P, l_S, l_R):
    model, split = qubit_model(l_P, l_S, l_R)
    ref = qubit_reference(l_P, l_S, l_R)
    assert alpha0(model, split) == pytest.approx(ref.alpha0, abs=1e-10)
    assert alpha0_prime(model, split) == pytest.approx(ref.alpha0_prime, abs=1e-10)
    assert alpha1(model, split).value == pytest.approx(ref.alpha1, abs=1e-6)


def test_alpha0_zero_for_block_diagonal():
    model = SmeModel.create(np.zeros((2, 2)), [(np.diag([1.0, 0.5]), ChannelKind.DIFFUSIVE)])
    split = SubspaceSplit.standard(2, 1)
    assert alpha0(model, split) == pytest.approx(0.0, abs=1e-12)
    assert alpha0_prime(model, split) == 0.0
    assert not check_gas(model, split)


def test_dark_state_is_not_gas(three_level):
    model, split = three_level
    assert alpha0(model, split) == pytest.approx(0.0, abs=1e-10)
    assert not check_gas(model, split)


def test_driven_three_level_is_gas(three_level_driven):
    model, split = three_level_driven
    rate = alpha0(model, split)
    assert rate > 1e-3
    assert check_gas(model, split)

    direct = superop_matrix(lambda X: apply_reduced(model, split, Generator.L_R, X), split.d_R)
    assert rate == pytest.approx(-np.max(np.linalg.eigvals(direct.mat).real), rel=1e-10)


def test_two_dim_target_is_gas(three_level_two_dim_target):
    model, split = three_level_two_dim_target
    assert check_invariance(model, split).invariant
    assert alpha0(model, split) == pytest.approx(1.0, abs=1e-10)
    assert check_gas(model, split)


def test_gas_undefined_without_invariance():
    with pytest.raises(StabilityPreconditionError):
        check_gas(*_raising_qubit())


def test_gas_fails_without_leak():
    assert not check_gas(*qubit_model(0.0, 0.5, 0.0))


def test_alpha0_prime_bounded_by_alpha0(rng, invariant_model_factory):
    for d, d_S in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 1)]:
        model, split = invariant_model_factory(rng, d, d_S)
        assert alpha0_prime(model, split) <= alpha0(model, split) + 1e-9


def test_alpha0_prime_bounded_by_alpha0_on_random_gas_models(rng):
    for model, split in random_gas_models(rng, 50):
        assert check_gas(model, split)
        assert 0.0 <= alpha0_prime(model, split) <= alpha0(model, split) + 1e-9


# =============================================================================
# ND / BETA_0
# =============================================================================

def test_beta0():
    assert beta0(1.0, 1.0, 0.5) == 1.5
    assert beta0(1.0, 1.0, 8.0) == 9.0
    assert beta0(2.0, 0.1, 0.2) == 2.0


def test_nd_on_qubit(qubit_left):
    assert check_nd(*qubit_left, settings=FAST)


def test_nd_fails_for_identity_channel():
    model = SmeModel.create(
        np.zeros((2, 2)),
        [(np.array([[0, 1], [0, 0]]), ChannelKind.DIFFUSIVE), (np.eye(2), ChannelKind.DIFFUSIVE)],
    )
    assert not check_nd(model, SubspaceSplit.standard(2, 1), settings=FAST)


def test_nd_requires_sp():
    model = SmeModel.create(np.zeros((2, 2)), [(np.diag([1.0, 0.0]), ChannelKind.JUMP)])
    with pytest.raises(StabilityPreconditionError):
        check_nd(model, SubspaceSplit.standard(2, 1), settings=FAST)


def test_nd_channel_keeps_reduced_generators():
    model, split = qubit_model(1.0, 0.0, 0.0)
    assert alpha1(model, split).value == pytest.approx(0.0, abs=1e-12)

    augmented = add_nd_channel(model, split, 2.0, 0.0)
    for which in (Generator.L_S, Generator.L_R):
        np.testing.assert_allclose(
            generator_superop(augmented, split, which).mat, generator_superop(model, split, which).mat, atol=1e-14
        )
    assert alpha0(augmented, split) == pytest.approx(alpha0(model, split))
    assert alpha1(augmented, split).value == pytest.approx(8.0, abs=1e-9)


def test_nd_channel_on_three_level(three_level):
    model, split = three_level
    augmented = add_nd_channel(model, split, 1.0, 0.0)
    assert augmented.channels[augmented.p].kind is ChannelKind.DIFFUSIVE
    assert alpha1(augmented, split, FAST.optimizer).value == pytest.approx(2.0, abs=1e-4)


# =============================================================================
# REPORT
# =============================================================================

def test_report_for_qubit(qubit_left):
    report = analyze(*qubit_left, settings=FAST)
    assert report.invariant and report.gas and report.sp and report.nd
    assert report.alpha0 == pytest.approx(1.0)
    assert report.alpha0_prime == pytest.approx(1.0)
    assert report.alpha1 == pytest.approx(0.5, abs=1e-9)
    assert report.beta0 == pytest.approx(1.5, abs=1e-9)
    assert report.alpha0_prime_consistent
    assert report.certificate is not None
    assert report.certificate.certified_rate >= 0.5 - 1e-9

    payload = report.to_dict()
    assert payload["schema_version"] == SCHEMA_VERSION
    assert payload["residuals"]["sp_margin"] is None
    assert len(payload["certificate"]["K_R"]) == 1


def test_report_for_right_panel(qubit_right):
    report = analyze(*qubit_right, settings=FAST, certificate=False)
    assert report.alpha1 == pytest.approx(8.0, abs=1e-9)
    assert report.beta0 == pytest.approx(9.0, abs=1e-9)
    assert report.certificate is None


def test_report_for_non_gas_target(three_level):
    report = analyze(*three_level, settings=FAST)
    assert report.invariant
    assert not report.gas
    assert report.certificate is None
    assert report.certificate_error is None
    assert report.check_summary()["sp"] is True


def test_report_argmin_lies_in_target(qubit_left):
    report = analyze(*qubit_left, settings=FAST, certificate=False)
    _, split = qubit_left
    assert split.V(report.optimizer.rho) == pytest.approx(0.0, abs=1e-12)
    assert report.optimizer.value >= 0.0
