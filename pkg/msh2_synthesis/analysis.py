"""
Mean-square stability and performance of a closed loop with multiplicative input noise.

The nominal loop G maps (w, d) to (z, u) with the mean system H inside.
The loop is mean-square stable iff ||G_ud Phi||^2 < 1, and then

    J_H2 = ||G_zw||^2 + ||G_uw||^2 ||G_zd Phi||^2 / (1 - ||G_ud Phi||^2).

The moment oracle recomputes both quantities from the exact second-moment
recursion of the lifted state, without going through Phi.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq, minimize_scalar
import control

from .base import (
    TOL_MARGINAL,
    Verdict,
    InstabilityError,
    ValidationError,
    classify,
)
from .model import Plant, NoiseModel, spectral_radius
from .spectrum import SpectralModel
from .riccati import h2_norm_sq


logger = logging.getLogger(__name__)


MAX_ORACLE_STATES = 12
MAX_ORACLE_HORIZON = 3


@dataclass
class NominalClosedLoop:
    """Nominal closed loop with inputs (w, d) and outputs (z, u)"""

    sys: control.StateSpace
    p: int

    def _block(self, rows: slice, col: int) -> control.StateSpace:
        sys: control.StateSpace = self.sys
        return control.ss(
            sys.A, sys.B[:, col:col + 1], sys.C[rows, :], sys.D[rows, col:col + 1], True
        )

    @property
    def G_zw(self) -> control.StateSpace:
        return self._block(slice(0, self.p), 0)

    @property
    def G_zd(self) -> control.StateSpace:
        return self._block(slice(0, self.p), 1)

    @property
    def G_uw(self) -> control.StateSpace:
        return self._block(slice(self.p, self.p + 1), 0)

    @property
    def G_ud(self) -> control.StateSpace:
        return self._block(slice(self.p, self.p + 1), 1)


@dataclass
class StabilityReport:
    """Mean-square verdict of a closed loop"""

    g_hat: np.ndarray
    rho: float
    ms_stable: bool
    J_H2: Optional[float]
    margin: float
    verdict: Verdict
    sigma0: float = 1.0
    norms: Dict[str, float] = field(default_factory=dict)


@dataclass
class MomentResult:
    """Exact second-moment behaviour of the lifted closed loop"""

    rho: float
    power_z: Optional[float]
    power_u: Optional[float]
    covariance: Optional[np.ndarray] = None


def _controller_matrices(K) -> tuple:
    """(A_K, B_K, C_K, D_K) as float arrays"""
    return tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in (K.A, K.B, K.C, K.D))


def close_nominal(plant: Plant, spectral: SpectralModel, K) -> NominalClosedLoop:
    """Interconnect plant, mean system and controller"""
    A_K, B_K, C_K, D_K = _controller_matrices(K)
    n: int = plant.n
    tau: int = spectral.horizon
    order: int = A_K.shape[0] if K.nstates else 0
    if not K.nstates:
        A_K = np.zeros((0, 0))
        B_K = np.zeros((0, plant.q))
        C_K = np.zeros((1, 0))

    if D_K.shape != (1, plant.q):
        raise ValidationError(
            f"controller maps {D_K.shape[1]} measurements, plant has {plant.q}", field="D_K"
        )

    B2: np.ndarray = plant.B2
    C2: np.ndarray = plant.C2
    mu0: float = spectral.Dhat1
    size: int = n + tau + order

    gain: np.ndarray = D_K @ C2
    A: np.ndarray = np.zeros((size, size))
    x, h, k = slice(0, n), slice(n, n + tau), slice(n + tau, size)
    A[x, x] = plant.A + mu0 * B2 @ gain
    A[x, h] = B2 @ spectral.Chat
    A[x, k] = mu0 * B2 @ C_K
    A[h, x] = spectral.Bhat1 @ gain
    A[h, h] = spectral.Ahat
    A[h, k] = spectral.Bhat1 @ C_K
    A[k, x] = B_K @ C2
    A[k, k] = A_K

    B: np.ndarray = np.zeros((size, 2))
    B[x, 0:1] = plant.B1
    B[x, 1:2] = B2

    C_u: np.ndarray = np.hstack([gain, np.zeros((1, tau)), C_K])
    C_z: np.ndarray = np.hstack([
        plant.C1 + mu0 * plant.D @ gain,
        plant.D @ spectral.Chat,
        mu0 * plant.D @ C_K,
    ])
    C: np.ndarray = np.vstack([C_z, C_u])
    D: np.ndarray = np.zeros((plant.p + 1, 2))
    D[: plant.p, 1:2] = plant.D

    eigs: np.ndarray = np.linalg.eigvals(A) if size else np.zeros(0)
    unstable: np.ndarray = eigs[np.abs(eigs) >= 1]
    if unstable.size:
        raise InstabilityError(
            f"nominal closed loop is unstable, eigenvalues {np.array2string(unstable, precision=4)}",
            eigenvalues=unstable,
        )

    return NominalClosedLoop(sys=control.ss(A, B, C, D, True), p=plant.p)


def _factor_system(Phi) -> control.StateSpace:
    if isinstance(Phi, SpectralModel):
        return Phi.factor_system()
    return Phi


def ms_stability(loop: NominalClosedLoop, Phi, sigma0: float = 1.0) -> StabilityReport:
    """Mean-square stability test, H2 cost and the G-hat matrix"""
    factor: control.StateSpace = _factor_system(Phi)

    zw: float = h2_norm_sq(loop.G_zw)
    uw: float = h2_norm_sq(loop.G_uw)
    zd: float = h2_norm_sq(control.series(factor, loop.G_zd))
    ud: float = h2_norm_sq(control.series(factor, loop.G_ud))

    margin: float = 1 - ud
    verdict: Verdict = classify(margin)
    ms_stable: bool = margin > 0
    if verdict == Verdict.MARGINAL:
        logger.warning("mean-square margin %.3e is within the marginal band", margin)

    J: Optional[float] = zw + uw * zd / margin if ms_stable else None

    g_hat: np.ndarray = np.array([
        [sigma0 ** 2 * zw, zd],
        [sigma0 ** 2 * uw, ud],
    ])
    rho: float = float(np.max(np.abs(np.linalg.eigvals(g_hat))))

    return StabilityReport(
        g_hat=g_hat,
        rho=rho,
        ms_stable=ms_stable,
        J_H2=J,
        margin=margin,
        verdict=verdict,
        sigma0=sigma0,
        norms={"zw": zw, "uw": uw, "zd_phi": zd, "ud_phi": ud},
    )


def analyze(plant: Plant, spectral: SpectralModel, K, sigma0: float = 1.0) -> StabilityReport:
    """Close the nominal loop and run the mean-square test"""
    loop: NominalClosedLoop = close_nominal(plant, spectral, K)
    return ms_stability(loop, spectral, sigma0)


def _column_sums(g_hat: np.ndarray, gamma_sq: float) -> np.ndarray:
    """Column sums of Gamma G Gamma^-1 with Gamma = diag(1, gamma^2)"""
    scale: np.ndarray = np.array([1.0, gamma_sq])
    return (scale[:, None] * g_hat / scale[None, :]).sum(axis=0)


def scaling_certificate(g_hat: np.ndarray) -> Optional[float]:
    """gamma^2 making both weighted column sums < 1, or None; sigma0 is already in G-hat"""
    g_hat = np.array(g_hat, dtype=float)
    if np.any(g_hat < 0):
        raise ValidationError("G-hat must be entrywise nonnegative", field="g_hat")

    rho: float = float(np.max(np.abs(np.linalg.eigvals(g_hat))))
    if rho >= 1:
        return None

    # Perturb towards a positive matrix so the Perron vector is interior
    candidates = []
    for epsilon in (0.0, 1e-3 * (1 - rho), 1e-6 * (1 - rho)):
        values, vectors = np.linalg.eig((g_hat + epsilon).T)
        left: np.ndarray = np.abs(np.real(vectors[:, int(np.argmax(np.abs(values)))]))
        if np.all(left > 0):
            candidates.append(left[1] / left[0])

    for gamma_sq in candidates:
        if np.all(_column_sums(g_hat, gamma_sq) < 1):
            return float(gamma_sq)

    logger.warning("no diagonal scaling certificate found for rho %.6g", rho)
    return None


def scaled_spectral_radius(g_hat: np.ndarray) -> float:
    """Infimum over diagonal scalings of the largest weighted column sum"""
    g_hat = np.asarray(g_hat, dtype=float)

    def objective(log_gamma_sq: float) -> float:
        return float(np.max(_column_sums(g_hat, np.exp(log_gamma_sq))))

    def gap(log_gamma_sq: float) -> float:
        sums: np.ndarray = _column_sums(g_hat, np.exp(log_gamma_sq))
        return float(sums[0] - sums[1])

    # First column sum increases and second decreases with gamma
    if gap(-60) < 0 < gap(60):
        return objective(brentq(gap, -60, 60, xtol=1e-14))

    result = minimize_scalar(objective, bounds=(-60, 60), method="bounded", options={"xatol": 1e-13})
    return min(float(result.fun), objective(0.0))


def weighted_cost(loop: NominalClosedLoop, Phi, weights) -> float:
    """Scalarized cost of the auxiliary problem for the given weights"""
    factor: control.StateSpace = _factor_system(Phi)
    gamma_sq: float = weights.gamma ** 2

    zw: float = h2_norm_sq(loop.G_zw)
    uw: float = h2_norm_sq(loop.G_uw)
    zd: float = h2_norm_sq(control.series(factor, loop.G_zd))
    ud: float = h2_norm_sq(control.series(factor, loop.G_ud))

    return (
        weights.lambda0 ** 2 * weights.sigma0 ** 2 * (zw + gamma_sq * uw)
        + weights.lambda1 ** 2 / gamma_sq * (zd + gamma_sq * ud)
    )


def duplication_matrix(size: int) -> np.ndarray:
    """D with vec(P) = D vech(P) for symmetric P (column-major vec)"""
    pairs = [(i, j) for j in range(size) for i in range(j, size)]
    dup: np.ndarray = np.zeros((size * size, len(pairs)))
    for column, (i, j) in enumerate(pairs):
        dup[i + j * size, column] = 1
        dup[j + i * size, column] = 1
    return dup


def moment_oracle(plant: Plant, noise: NoiseModel, K) -> MomentResult:
    """Exact second-moment map of plant, controller and pending channel deliveries"""
    A_K, B_K, C_K, D_K = _controller_matrices(K)
    n: int = plant.n
    order: int = K.nstates
    tau: int = noise.horizon
    size: int = n + order + tau

    if tau > MAX_ORACLE_HORIZON or size > MAX_ORACLE_STATES:
        raise ValidationError(
            f"moment oracle limited to {MAX_ORACLE_STATES} states and horizon {MAX_ORACLE_HORIZON}",
            field="size",
        )
    if not order:
        B_K = np.zeros((0, plant.q))
        C_K = np.zeros((1, 0))

    x, k, q = slice(0, n), slice(n, n + order), slice(n + order, size)

    # u = c_u zeta
    c_u: np.ndarray = np.zeros((1, size))
    c_u[:, x] = D_K @ plant.C2
    c_u[:, k] = C_K

    # Direction of the lag-i gain in the state update
    directions = []
    for i in range(tau + 1):
        b: np.ndarray = np.zeros((size, 1))
        if i == 0:
            b[x] = plant.B2
        else:
            b[n + order + i - 1] = 1
        directions.append(b @ c_u)

    A0: np.ndarray = sum(mu * Ai for mu, Ai in zip(noise.mu, directions))
    A0[x, x] += plant.A
    A0[k, x] += B_K @ plant.C2
    A0[k, k] += A_K
    if tau:
        A0[x, n + order] += plant.B2.ravel()
        for j in range(tau - 1):
            A0[n + order + j, n + order + j + 1] += 1

    full: np.ndarray = np.kron(A0, A0)
    for i in range(tau + 1):
        for j in range(tau + 1):
            if noise.beta[i, j]:
                full += noise.beta[i, j] * np.kron(directions[j], directions[i])

    dup: np.ndarray = duplication_matrix(size)
    restricted: np.ndarray = np.linalg.pinv(dup) @ full @ dup
    rho: float = spectral_radius(restricted)
    if rho >= 1 - TOL_MARGINAL:
        return MomentResult(rho=rho, power_z=None, power_u=None)

    B_w: np.ndarray = np.zeros((size, 1))
    B_w[x] = plant.B1
    source: np.ndarray = np.linalg.pinv(dup) @ (B_w @ B_w.T).ravel(order="F")
    vech: np.ndarray = la.solve(np.eye(restricted.shape[0]) - restricted, source)
    P: np.ndarray = (dup @ vech).reshape(size, size, order="F")

    C_z: np.ndarray = np.zeros((plant.p, size))
    C_z[:, x] = plant.C1
    C_z += noise.mu[0] * plant.D @ c_u
    if tau:
        C_z[:, n + order] += plant.D.ravel()
    noisy: np.ndarray = plant.D @ c_u

    power_z: float = float(np.trace(C_z @ P @ C_z.T) + noise.beta[0, 0] * np.trace(noisy @ P @ noisy.T))
    power_u: float = float(c_u @ P @ c_u.T)
    return MomentResult(rho=rho, power_z=power_z, power_u=power_u, covariance=P)
