import numpy as np
import control
import pytest
from numpy.testing import assert_allclose

from msh2_synthesis.base import (
    FeedbackMode,
    InstabilityError,
    StructuralError,
    SynthesisStatus,
    ValidationError,
)
from msh2_synthesis.model import NoiseModel, erasure_channel_noise, spectral_radius
from msh2_synthesis.spectrum import build_spectral_model, shared_realization
from msh2_synthesis.riccati import solve_dare, mare_problem
from msh2_synthesis.analysis import analyze, close_nominal, weighted_cost
from msh2_synthesis.synthesis import (
    AnalysisWeights,
    build_augmented_plant,
    design_controller,
    erasure_closed_forms,
    explicit_observer_riccati,
    gamma_design,
    optimal_cost,
    optimal_state_feedback,
    phi0,
)


M_SQUARED = 1.32 ** 2


def test_augmented_plant_shape(delay_plant, delay_noise):
    aug = build_augmented_plant(delay_plant, build_spectral_model(delay_noise))
    assert aug.size == 5
    assert (aug.r1, aug.r2) == (1, 1)
    assert aug.PsiBar.shape == (5, 2)
    assert_allclose(aug.Abar[:3, 3:], [[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    assert_allclose(aug.Btilde2[3:], [[0.201], [0.0]])


def test_zero_factor_feedthrough_is_structural(delay_plant):
    spectral = shared_realization([1.0, 0.0], [0.0, 0.2])
    with pytest.raises(StructuralError):
        build_augmented_plant(delay_plant, spectral)


def test_worked_example_controller(delay_plant, delay_noise):
    result = design_controller(delay_plant, delay_noise)

    assert result.status == SynthesisStatus.FEASIBLE
    assert result.order == 5
    assert np.min(np.linalg.eigvalsh(result.X)) > -1e-9
    assert result.mare.residual < 1e-9
    assert spectral_radius(result.aug.Abar + result.aug.Btilde2 @ result.F) < 1
    assert_allclose(result.F, optimal_state_feedback(result.aug, result.X))

    report = analyze(delay_plant, result.spectral, result.K)
    assert report.ms_stable
    assert report.J_H2 == pytest.approx(result.J_opt, rel=1e-6)


def test_perfect_channel_reduces_to_h2_design(delay_plant):
    result = design_controller(delay_plant, NoiseModel(mu=[1.0], beta=[[0.0]]))
    assert result.aug.deterministic
    assert result.aug.PsiBar.shape == (3, 1)

    problem = mare_problem(result.aug, 1.0)
    X, _ = solve_dare(problem)
    assert_allclose(result.X, X, rtol=1e-9, atol=1e-12)
    assert result.J_opt == pytest.approx(float(delay_plant.B1.T @ X @ delay_plant.B1))

    # Two outputs, one disturbance: the spare output stabilizes the observer
    aug = result.aug
    assert spectral_radius(aug.Abar + result.L @ aug.Cbar2) < 1
    assert_allclose(result.L @ aug.Cbar2 @ aug.PsiBar, -aug.Abar @ aug.PsiBar, atol=1e-9)

    report = analyze(delay_plant, result.spectral, result.K)
    assert report.margin == pytest.approx(1.0)
    assert report.J_H2 == pytest.approx(result.J_opt, rel=1e-6)


@pytest.mark.parametrize("e", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
def test_erasure_minimum_power(erasure_plant, e):
    result = design_controller(erasure_plant, erasure_channel_noise(e), FeedbackMode.STATE)
    assert result.feasible
    assert result.order == 0

    expected = (M_SQUARED - 1) / (1 - e * M_SQUARED)
    assert result.J_opt == pytest.approx(expected, rel=1e-6)

    stabilizable, closed_form = erasure_closed_forms(erasure_plant.unstable_poles(), e)
    assert stabilizable
    assert closed_form == pytest.approx(expected)


def test_erasure_minimum_power_without_loss(erasure_plant):
    result = design_controller(erasure_plant, erasure_channel_noise(0.0), FeedbackMode.STATE)
    assert result.J_opt == pytest.approx(0.7424, abs=1e-4)


def test_erasure_threshold(erasure_plant):
    def feasible(e: float) -> bool:
        return design_controller(erasure_plant, erasure_channel_noise(e), FeedbackMode.STATE).feasible

    assert not feasible(0.7)
    assert erasure_closed_forms(erasure_plant.unstable_poles(), 0.7) == (False, np.inf)

    low, high = 0.0, 0.9
    while high - low > 1e-4:
        middle = (low + high) / 2
        if feasible(middle):
            low = middle
        else:
            high = middle
    assert (low + high) / 2 == pytest.approx(1 / M_SQUARED, abs=1e-3)
    assert 1 / M_SQUARED == pytest.approx(0.5739, abs=1e-4)


def test_state_mode_preconditions(delay_plant, delay_noise, erasure_plant):
    with pytest.raises(ValidationError):
        design_controller(erasure_plant, delay_noise, FeedbackMode.STATE)
    with pytest.raises(ValidationError):
        design_controller(delay_plant, erasure_channel_noise(0.1), FeedbackMode.STATE)


def test_rank_deficient_measurement_map(erasure_plant):
    with pytest.raises(StructuralError):
        design_controller(erasure_plant, erasure_channel_noise(0.1), FeedbackMode.OUTPUT)


def test_weighted_cost_of_auxiliary_design(delay_plant, delay_noise):
    spectral = build_spectral_model(delay_noise)
    aug = build_augmented_plant(delay_plant, spectral)

    for weights in (
        AnalysisWeights(),
        AnalysisWeights(sigma0=2.0, gamma=0.5, lambda0=0.6, lambda1=0.8),
    ):
        design = gamma_design(aug, weights)
        loop = close_nominal(delay_plant, spectral, design.K)
        assert weighted_cost(loop, spectral, weights) == pytest.approx(design.cost, rel=1e-6)


def test_explicit_observer_riccati(delay_plant, delay_noise):
    aug = build_augmented_plant(delay_plant, build_spectral_model(delay_noise))
    rng = np.random.default_rng(7)

    for _ in range(10):
        angle = rng.uniform(0.05, np.pi / 2 - 0.05)
        weights = AnalysisWeights(
            sigma0=rng.uniform(0.2, 3.0),
            gamma=rng.uniform(0.2, 3.0),
            lambda0=np.cos(angle),
            lambda1=np.sin(angle),
        )
        Y, residual = explicit_observer_riccati(aug, weights)
        assert residual < 1e-9
        assert np.min(np.linalg.eigvalsh(Y)) > -1e-12


def test_analysis_weights_are_validated():
    with pytest.raises(ValidationError):
        AnalysisWeights(lambda0=1.0, lambda1=1.0)
    with pytest.raises(ValidationError):
        AnalysisWeights(gamma=0.0)


@pytest.mark.parametrize(
    "mu, beta, factor",
    [
        (None, None, 0.5),
        ([0.9], [[0.01]], 4.0),
    ],
)
def test_observer_gain_depends_on_mean_only(delay_plant, delay_noise, mu, beta, factor):
    noise = delay_noise if mu is None else NoiseModel(mu=mu, beta=beta)
    perturbed = NoiseModel(mu=noise.mu, beta=factor * noise.beta)

    base = design_controller(delay_plant, noise)
    moved = design_controller(delay_plant, perturbed)
    assert base.feasible and moved.feasible
    assert_allclose(moved.L, base.L, atol=1e-9)


def test_optimal_cost_is_disturbance_functional(delay_plant, delay_noise, erasure_plant):
    result = design_controller(delay_plant, delay_noise)
    assert optimal_cost(delay_plant, result.X) == pytest.approx(phi0(result.aug, result.X), rel=1e-12)
    assert result.J_opt == pytest.approx(result.aug.phi0(result.X), rel=1e-12)

    state = design_controller(erasure_plant, erasure_channel_noise(0.2), FeedbackMode.STATE)
    assert state.J_opt == pytest.approx(phi0(state.aug, state.X), rel=1e-12)


def test_optimal_controller_beats_perturbed_controllers(delay_plant, delay_noise):
    result = design_controller(delay_plant, delay_noise)
    best = analyze(delay_plant, result.spectral, result.K).J_H2
    rng = np.random.default_rng(11)

    K = result.K
    matrices = [np.asarray(m, dtype=float) for m in (K.A, K.B, K.C, K.D)]
    costs = []
    for _ in range(2000):
        scale = rng.uniform(0.001, 0.02)
        A_K, B_K, C_K, D_K = (m + scale * np.max(np.abs(m)) * rng.standard_normal(m.shape) for m in matrices)
        candidate = control.ss(A_K, B_K, C_K, D_K, True)
        try:
            report = analyze(delay_plant, result.spectral, candidate)
        except InstabilityError:
            continue
        if report.ms_stable:
            costs.append(report.J_H2)
        if len(costs) == 50:
            break

    assert len(costs) == 50
    assert min(costs) >= best * (1 - 1e-9)


def test_cost_grows_with_noise_variance(delay_plant, delay_noise):
    result = design_controller(delay_plant, delay_noise)

    fixed, optimal = [], []
    for factor in (0.25, 0.5, 1.0, 1.5):
        noise = NoiseModel(mu=delay_noise.mu, beta=factor * delay_noise.beta)
        report = analyze(delay_plant, build_spectral_model(noise), result.K)
        assert report.ms_stable
        fixed.append(report.J_H2)
        optimal.append(design_controller(delay_plant, noise).J_opt)

    assert np.all(np.diff(fixed) >= 0)
    assert np.all(np.diff(optimal) >= -1e-9 * optimal[-1])
    assert optimal[2] == pytest.approx(fixed[2], rel=1e-6)
