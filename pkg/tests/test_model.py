import numpy as np
import pytest
from numpy.testing import assert_allclose

from msh2_synthesis.base import FeedbackMode, StructuralError, ValidationError
from msh2_synthesis.model import (
    NoiseModel,
    Plant,
    delay_channel_noise,
    erasure_channel_noise,
    evaluate_fir,
    invariant_zeros,
    relative_degree,
    validate_assumptions,
)


def test_delay_channel_moments(delay_noise):
    assert_allclose(delay_noise.mu, [0.6, 0.201, 0.0])
    assert_allclose(np.diag(delay_noise.beta), [0.24, 0.094269, 0.0], atol=1e-12)
    assert delay_noise.beta[0, 1] == pytest.approx(-0.6 * 0.201)
    assert delay_noise.horizon == 2
    assert not delay_noise.deterministic


def test_delay_probabilities_must_sum_to_one():
    with pytest.raises(ValidationError) as info:
        delay_channel_noise([1.0, 0.5], [0.5, 0.45])
    assert info.value.field == "p"


def test_delay_probability_out_of_range_reports_index():
    with pytest.raises(ValidationError) as info:
        delay_channel_noise([1.0, 0.5, 0.2], [0.6, 0.5, -0.1])
    assert info.value.index == 2


def test_erasure_moments(erasure_noise):
    assert_allclose(erasure_noise.mu, [0.9])
    assert_allclose(erasure_noise.beta, [[0.09]])
    assert erasure_channel_noise(0.0).deterministic

    with pytest.raises(ValidationError):
        erasure_channel_noise(1.5)


def test_noise_model_rejects_bad_covariance():
    with pytest.raises(ValidationError):
        NoiseModel(mu=[1.0, 0.5], beta=[[1.0, 0.2], [0.1, 1.0]])
    with pytest.raises(ValidationError):
        NoiseModel(mu=[1.0, 0.5], beta=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValidationError) as info:
        NoiseModel(mu=[1.0, 0.5], beta=[[1.0, 0.0], [0.0, -1.0]])
    assert info.value.index == 1


def test_noise_model_is_read_only(delay_noise):
    with pytest.raises(ValueError):
        delay_noise.mu[0] = 2.0


def test_plant_checks_dimensions():
    with pytest.raises(ValidationError) as info:
        Plant(A=np.eye(2), B1=[[1.0], [0.0], [0.0]], B2=[[1.0], [0.0]], C1=[[1.0, 0.0]], C2=[[1.0, 0.0]], D=[[1.0]])
    assert info.value.field == "B1"


def test_plant_dimensions(delay_plant):
    assert (delay_plant.n, delay_plant.p, delay_plant.q) == (3, 1, 2)
    assert_allclose(sorted(abs(z) for z in delay_plant.unstable_poles()), [1.1, 1.2])


def test_relative_degree():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    assert relative_degree(A, B, np.array([[0.0, 1.0]])) == 1
    assert relative_degree(A, B, np.array([[1.0, 0.0]])) == 2

    with pytest.raises(StructuralError):
        relative_degree(A, np.zeros((2, 1)), np.array([[1.0, 0.0]]))


def test_evaluate_fir():
    assert evaluate_fir([1.0, -2.0], 2.0) == pytest.approx(0.0)
    assert evaluate_fir([1.0, 0.5], 1.0) == pytest.approx(1.5)


def test_worked_plant_zero(delay_plant):
    zeros = invariant_zeros(delay_plant.A, np.hstack([delay_plant.B1, delay_plant.B2]), delay_plant.C2)
    assert zeros
    assert_allclose(np.real(zeros), 0.3, atol=1e-6)
    assert_allclose(np.imag(zeros), 0.0, atol=1e-6)


def test_worked_plant_satisfies_assumptions(delay_plant, delay_noise):
    report = validate_assumptions(delay_plant, delay_noise.mu)
    assert report.passed, report.failures()
    assert (report.r1, report.r2) == (1, 1)
    assert report.margins["Gy_minimum_phase"] == pytest.approx(0.7, abs=1e-6)


def test_zeroed_input_is_not_stabilizable(delay_plant, delay_noise):
    plant = Plant(
        A=delay_plant.A,
        B1=delay_plant.B1,
        B2=np.zeros((3, 1)),
        C1=delay_plant.C1,
        C2=delay_plant.C2,
        D=delay_plant.D,
    )
    report = validate_assumptions(plant, delay_noise.mu)
    assert not report.passed
    assert "stabilizable_AB2" in report.failures()


def test_mean_channel_zero_at_unstable_pole():
    plant = Plant(A=[[2.0]], B1=[[1.0]], B2=[[1.0]], C1=[[1.0]], C2=[[1.0]], D=[[1.0]])
    report = validate_assumptions(plant, [1.0, -2.0])
    assert "H_nonzero_at_unstable_poles" in report.failures()


def test_state_mode_replaces_output_checks(erasure_plant, erasure_noise):
    output = validate_assumptions(erasure_plant, erasure_noise.mu)
    assert "C2Psi_full_column_rank" in output.failures()

    state = validate_assumptions(erasure_plant, erasure_noise.mu, FeedbackMode.STATE)
    assert state.passed, state.failures()
    assert "full_state_measurement" in state.checks()
    assert "C2Psi_full_column_rank" not in state.checks()


def test_relative_degree_survives_similarity(delay_plant):
    rng = np.random.default_rng(5)
    chain = (np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), np.array([[1.0, 0.0]]))
    systems = [
        (delay_plant.A, delay_plant.B1, delay_plant.C2),
        (delay_plant.A, delay_plant.B2, delay_plant.C2),
        chain,
    ]

    for A, B, C in systems:
        expected = relative_degree(A, B, C)
        for _ in range(5):
            T = rng.standard_normal(A.shape) + 3 * np.eye(A.shape[0])
            T_inv = np.linalg.inv(T)
            assert relative_degree(T @ A @ T_inv, T @ B, C @ T_inv) == expected
    assert relative_degree(*chain) == 2
