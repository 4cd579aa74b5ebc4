"""
Second-order description of the multiplicative noise.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import control

from .base import (
    TOL_CIRCLE,
    TOL_PAIR,
    FREQ_GRID,
    FactorizationError,
    ValidationError,
)
from .model import NoiseModel, delay_channel_noise


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LaurentSpectrum:
    """Autocorrelation r(0..tau) of the zero-mean noise residual"""

    r: np.ndarray

    def __post_init__(self) -> None:
        """Constructor"""
        r: np.ndarray = np.atleast_1d(np.array(self.r, dtype=float)).ravel()
        if r.size == 0 or not np.all(np.isfinite(r)):
            raise ValidationError("autocorrelation must be a finite nonempty vector", field="r")
        if r[0] < 0:
            raise ValidationError(f"r(0)={r[0]} is negative", field="r", index=0)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def horizon(self) -> int:
        return self.r.size - 1

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """S(e^{j theta}) = r(0) + 2 sum r(l) cos(l theta)"""
        theta = np.asarray(theta, dtype=float)
        lags: np.ndarray = np.arange(1, self.r.size)
        return self.r[0] + 2 * np.cos(np.multiply.outer(theta, lags)) @ self.r[1:]

    def grid_minimum(self) -> float:
        """Minimum of the spectrum over the frequency grid"""
        theta: np.ndarray = np.linspace(0, np.pi, FREQ_GRID)
        return float(np.min(self.evaluate(theta)))


@dataclass(frozen=True)
class SpectralModel:
    """Mean system H, spectral factor Phi and their common realization"""

    H: np.ndarray
    Phi: np.ndarray
    Ahat: np.ndarray
    Bhat1: np.ndarray
    Bhat2: np.ndarray
    Chat: np.ndarray
    Dhat1: float
    Dhat2: float

    @property
    def horizon(self) -> int:
        return self.Ahat.shape[0]

    @property
    def deterministic(self) -> bool:
        return not np.any(self.Phi)

    def mean_system(self) -> control.StateSpace:
        """H(z) as a discrete-time state-space system"""
        return control.ss(self.Ahat, self.Bhat1, self.Chat, [[self.Dhat1]], True)

    def factor_system(self) -> control.StateSpace:
        """Phi(z) as a discrete-time state-space system"""
        return control.ss(self.Ahat, self.Bhat2, self.Chat, [[self.Dhat2]], True)

    def impulse_response(self, length: int = None) -> np.ndarray:
        """Markov parameters of [H Phi], one row per sample"""
        if length is None:
            length = self.horizon + 1

        rows: List[np.ndarray] = [np.array([self.Dhat1, self.Dhat2])]
        B: np.ndarray = np.hstack([self.Bhat1, self.Bhat2])
        state: np.ndarray = B
        for _ in range(1, length):
            if self.horizon:
                rows.append((self.Chat @ state).ravel())
                state = self.Ahat @ state
            else:
                rows.append(np.zeros(2))
        return np.array(rows)


def autocorrelation(noise: NoiseModel) -> LaurentSpectrum:
    """r(l) as the sum of the l-th superdiagonal of beta"""
    size: int = noise.horizon + 1
    r: np.ndarray = np.array([np.trace(noise.beta, offset=lag) for lag in range(size)])
    return LaurentSpectrum(r=r)


def delay_channel_spectrum(weights: Sequence[float], probs: Sequence[float]) -> LaurentSpectrum:
    """
    Autocorrelation of a random-delay channel from the pairwise form
    1/2 sum_ij (a_i z^i - a_j z^j)(a_i z^-i - a_j z^-j) p_i p_j.
    """
    alpha: np.ndarray = np.asarray(weights, dtype=float).ravel()
    p: np.ndarray = np.asarray(probs, dtype=float).ravel()

    # Validates the simplex
    delay_channel_noise(alpha, p)

    size: int = alpha.size
    r: np.ndarray = np.zeros(size)
    for i in range(size):
        for j in range(size):
            weight: float = 0.5 * p[i] * p[j]
            r[0] += weight * (alpha[i] ** 2 + alpha[j] ** 2)
            cross: float = weight * alpha[i] * alpha[j]
            r[abs(i - j)] -= 2 * cross if i == j else cross
    return LaurentSpectrum(r=r)


def spectral_factorize(spectrum: LaurentSpectrum) -> np.ndarray:
    """Minimum-phase Phi with Phi(z) Phi(1/z) = S(z), padded to tau+1 taps"""
    r: np.ndarray = spectrum.r
    size: int = r.size
    phi: np.ndarray = np.zeros(size)

    if not np.any(r):
        return phi

    r0: float = r[0]
    if r0 <= 0:
        raise ValidationError("r(0) must be positive for a nonzero spectrum", field="r", index=0)

    lowest: float = spectrum.grid_minimum()
    if lowest < -TOL_CIRCLE * max(1.0, r0):
        raise ValidationError(f"spectrum is negative on the unit circle (min {lowest:.3e})", field="r")

    significant: np.ndarray = np.flatnonzero(np.abs(r) > 1e-14 * r0)
    degree: int = int(significant[-1])

    if degree == 0:
        phi[0] = np.sqrt(r0)
        return phi

    # z^m S(z) in descending powers is palindromic
    coef: np.ndarray = np.concatenate([r[degree:0:-1], r[: degree + 1]])
    roots: np.ndarray = np.roots(coef)
    roots = roots[np.argsort(np.abs(roots))]

    for root in roots:
        if abs(abs(root) - 1) < TOL_PAIR:
            frequency: float = abs(float(np.angle(root)))
            raise FactorizationError(
                f"spectrum vanishes on the unit circle at frequency {frequency:.6g} rad",
                frequency=frequency,
            )

    inside: np.ndarray = roots[:degree]
    outside: List[complex] = list(roots[degree:])
    for root in inside:
        products: np.ndarray = np.abs(root * np.array(outside) - 1)
        j: int = int(np.argmin(products))
        if products[j] >= TOL_PAIR:
            raise FactorizationError(f"root {root:.6g} has no reciprocal partner")
        outside.pop(j)

    monic: np.ndarray = np.real(np.poly(inside))
    gain: float = np.sqrt(r0 / np.sum(monic ** 2))
    phi[: degree + 1] = gain * monic

    residual: float = float(np.max(np.abs(np.convolve(phi, phi[::-1])[size - 1:] - r)))
    logger.debug("spectral factor %s, round-trip residual %.3e", phi, residual)
    if residual > 1e-8 * (1 + r0):
        raise FactorizationError(f"factor does not reproduce the spectrum (residual {residual:.3e})")

    return phi


def shared_realization(H: Sequence[float], Phi: Sequence[float]) -> SpectralModel:
    """Observable-companion realization shared by H(z) and Phi(z)"""
    mean: np.ndarray = np.asarray(H, dtype=float).ravel()
    factor: np.ndarray = np.asarray(Phi, dtype=float).ravel()
    if mean.size != factor.size or mean.size == 0:
        raise ValidationError(
            f"H has {mean.size} taps but Phi has {factor.size}", field="Phi"
        )

    tau: int = mean.size - 1
    Chat: np.ndarray = np.zeros((1, tau))
    if tau:
        Chat[0, 0] = 1.0

    model: SpectralModel = SpectralModel(
        H=mean,
        Phi=factor,
        Ahat=np.eye(tau, k=1),
        Bhat1=mean[1:].reshape(tau, 1),
        Bhat2=factor[1:].reshape(tau, 1),
        Chat=Chat,
        Dhat1=float(mean[0]),
        Dhat2=float(factor[0]),
    )

    replay: np.ndarray = model.impulse_response()
    if not np.allclose(replay, np.column_stack([mean, factor]), rtol=0, atol=1e-12):
        raise FactorizationError("shared realization does not replay the coefficients")

    return model


def build_spectral_model(noise: NoiseModel) -> SpectralModel:
    """Autocorrelation, factorization and realization in one step"""
    phi: np.ndarray = spectral_factorize(autocorrelation(noise))
    return shared_realization(noise.mu, phi)
