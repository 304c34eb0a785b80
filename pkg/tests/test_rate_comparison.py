"""Tests for the two-level reference and the bound comparison."""

import numpy as np
import pytest

from src.models.run_config import OptimizerConfig, Settings
from src.processors.exponent_fit import ExponentFit
from src.processors.rate_comparison import compare_rates, qubit_drift, qubit_model, qubit_reference
from src.processors.stability import analyze
from src.simulation.trajectory import SmeKernel, _ReducedObservables
from src.utils.errors import StabilityPreconditionError

FAST = Settings(optimizer=OptimizerConfig(starts=4))


def _fit(slope, stderr=0.01):
    return ExponentFit(slope=slope, intercept=0.0, window=(1.0, 3.0), r_squared=0.99, n_points=100, stderr=stderr)


@pytest.fixture
def left_report(qubit_left):
    return analyze(*qubit_left, settings=FAST, certificate=False)


def test_reference_values():
    left = qubit_reference(1.0, 0.5, 0.0)
    assert (left.alpha0, left.alpha0_prime, left.alpha1) == (1.0, 1.0, 0.5)
    assert left.as_exponent == -1.5
    assert left.beta0 == 1.5

    right = qubit_reference(1.0, 2.0, 0.0)
    assert right.alpha1 == 8.0
    assert right.as_exponent == -9.0


def test_reference_without_measurement_contrast():
    ref = qubit_reference(1.0, 0.7, 0.7)
    assert ref.alpha1 == 0.0
    assert ref.as_exponent == -1.0


def test_qubit_model_shape():
    model, split = qubit_model(1.0, 0.5, 0.0)
    assert model.p == 1 and model.n == 1
    assert split.d_S == 1


@pytest.mark.parametrize("p,c", [(0.3, 0.2 + 0.1j), (0.9, -0.05j), (0.5, 0.0)])
def test_qubit_drift_matches_general_formula(p, c):
    l_P, l_S, l_R = 0.8 + 0.6j, 0.5, -0.2
    model, split = qubit_model(l_P, l_S, l_R)
    rho = np.array([[p, c], [np.conj(c), 1 - p]])[None]

    obs = _ReducedObservables(model, split)
    V = obs.V(rho)
    r_R, _, tr_LR = obs.evaluate(rho, V)
    r = SmeKernel(model, 1e-3).r_values(rho)
    general = tr_LR[0] - 0.5 * np.sum((r_R[0] - r[0]) ** 2)

    assert qubit_drift(l_P, l_S, l_R, p, c) == pytest.approx(general, abs=1e-12)


def test_qubit_drift_limit_is_exponent():
    ref = qubit_reference(1.0, 2.0, 0.0)
    assert qubit_drift(1.0, 2.0, 0.0, 1.0, 0.0) == pytest.approx(ref.as_exponent)


def test_bounds_respected(left_report):
    ref = qubit_reference(1.0, 0.5, 0.0)
    fits = [_fit(-1.5), _fit(-1.4), _fit(-1.6), None]
    out = compare_rates(left_report, fits, mean_fit=_fit(-0.95), qubit=ref)
    assert out.status == "bound respected"
    assert out.n_fits == 3 and out.n_excluded == 1
    assert out.median_slope == pytest.approx(-1.5)
    assert out.qubit_match
    assert out.mean_bound_respected

    payload = out.to_dict()
    assert payload["theory"]["as_bound"] == pytest.approx(-1.5)
    assert payload["as"]["iqr"] == pytest.approx([-1.55, -1.45])


def test_bounds_violated(left_report):
    out = compare_rates(left_report, [_fit(1.0), _fit(1.2), _fit(0.8)])
    assert out.status == "bound violated"
    assert not out.as_bound_respected
    assert out.qubit_match is None


def test_qubit_mismatch(left_report):
    ref = qubit_reference(1.0, 0.5, 0.0)
    out = compare_rates(left_report, [_fit(-3.0), _fit(-3.1)], qubit=ref)
    assert out.as_bound_respected
    assert not out.qubit_match


def test_no_data(left_report):
    out = compare_rates(left_report, [None, None])
    assert out.status == "no data"
    assert out.n_excluded == 2


def test_requires_gas_target(three_level):
    report = analyze(*three_level, settings=FAST, certificate=False)
    with pytest.raises(StabilityPreconditionError):
        compare_rates(report, [_fit(-1.0)])
