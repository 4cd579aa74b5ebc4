import numpy as np
import pytest
from numpy.testing import assert_allclose

from msh2_synthesis.base import FactorizationError, ValidationError
from msh2_synthesis.model import NoiseModel, erasure_channel_noise
from msh2_synthesis.spectrum import (
    LaurentSpectrum,
    autocorrelation,
    build_spectral_model,
    delay_channel_spectrum,
    shared_realization,
    spectral_factorize,
)


def round_trip(phi: np.ndarray) -> np.ndarray:
    """r(l) = sum_i phi_i phi_{i+l}"""
    size: int = phi.size
    return np.convolve(phi, phi[::-1])[size - 1:]


def test_delay_autocorrelation(delay_noise):
    spectrum = autocorrelation(delay_noise)
    assert_allclose(spectrum.r, [0.334269, -0.1206, 0.0], atol=1e-12)


@pytest.mark.parametrize(
    "alpha, p",
    [
        ([1.0, 0.67, 0.0], [0.6, 0.3, 0.1]),
        ([1.0, 0.67, 0.0], [0.9, 0.0, 0.1]),
        ([1.0, 0.8, 0.5, 0.2], [0.4, 0.3, 0.2, 0.1]),
        ([0.7], [1.0]),
    ],
)
def test_pairwise_delay_spectrum_matches_moments(alpha, p):
    from msh2_synthesis.model import delay_channel_noise

    direct = delay_channel_spectrum(alpha, p)
    assert_allclose(direct.r, autocorrelation(delay_channel_noise(alpha, p)).r, atol=1e-12)


def test_delay_factor(delay_noise):
    phi = spectral_factorize(autocorrelation(delay_noise))
    assert phi.shape == (3,)
    assert phi[0] > 0
    assert phi[2] == 0
    assert_allclose(round_trip(phi), [0.334269, -0.1206, 0.0], atol=1e-12)
    assert np.max(np.abs(np.roots(phi[:2]))) < 1


def test_random_factorizations_are_minimum_phase():
    rng = np.random.default_rng(12345)
    for _ in range(100):
        size = int(rng.integers(1, 6))
        G = rng.uniform(-1, 1, (size, size))
        noise = NoiseModel(mu=rng.uniform(-1, 1, size), beta=G @ G.T)
        spectrum = autocorrelation(noise)

        phi = spectral_factorize(spectrum)
        assert_allclose(round_trip(phi), spectrum.r, atol=1e-10 * max(1.0, spectrum.r[0]))

        trimmed = np.trim_zeros(phi, "b")
        if trimmed.size > 1:
            assert np.max(np.abs(np.roots(trimmed))) < 1


def test_zero_on_unit_circle_reports_frequency():
    with pytest.raises(FactorizationError) as info:
        spectral_factorize(LaurentSpectrum(r=[2.0, 1.0]))
    assert info.value.frequency == pytest.approx(np.pi, abs=1e-3)


def test_negative_spectrum_is_rejected():
    with pytest.raises(ValidationError):
        spectral_factorize(LaurentSpectrum(r=[1.0, 1.0]))
    with pytest.raises(ValidationError):
        LaurentSpectrum(r=[-1.0])


def test_trivial_spectra():
    assert_allclose(spectral_factorize(LaurentSpectrum(r=[0.0, 0.0])), [0.0, 0.0])
    assert_allclose(spectral_factorize(LaurentSpectrum(r=[0.09])), [0.3])


def test_shared_realization_replays_coefficients():
    H = [0.6, 0.201, 0.0]
    Phi = [0.5, -0.2, 0.05]
    model = shared_realization(H, Phi)

    assert_allclose(model.Ahat, [[0.0, 1.0], [0.0, 0.0]])
    assert_allclose(model.Chat, [[1.0, 0.0]])
    assert (model.Dhat1, model.Dhat2) == (0.6, 0.5)
    assert_allclose(model.impulse_response(5), np.column_stack([H + [0, 0], Phi + [0, 0]]), atol=1e-15)

    with pytest.raises(ValidationError):
        shared_realization([1.0, 0.5], [1.0])


def test_memoryless_model():
    model = build_spectral_model(erasure_channel_noise(0.1))
    assert model.horizon == 0
    assert model.Dhat1 == pytest.approx(0.9)
    assert model.Dhat2 == pytest.approx(0.3)
    assert not model.deterministic

    assert build_spectral_model(erasure_channel_noise(0.0)).deterministic


def test_state_space_views(delay_noise):
    model = build_spectral_model(delay_noise)
    mean = model.mean_system()
    factor = model.factor_system()
    assert mean.nstates == 2
    assert_allclose(np.squeeze(mean.D), 0.6)
    assert_allclose(np.squeeze(factor.D), model.Phi[0])
