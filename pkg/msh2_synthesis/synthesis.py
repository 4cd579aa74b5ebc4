"""
Augmented plant, MARE-based gains and the optimal output-feedback controller.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import control

from .base import (
    TOL_RANK,
    FeedbackMode,
    SynthesisStatus,
    StructuralError,
    ValidationError,
)
from .model import Plant, NoiseModel, relative_degree, spectral_radius
from .spectrum import SpectralModel, build_spectral_model
from .riccati import (
    DareProblem,
    MareSolution,
    solve_dare,
    solve_mare,
    mare_problem,
    mare_weight,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentedPlant:
    """Plant, mean system and spectral factor on a shared state"""

    Abar: np.ndarray
    Bbar1: np.ndarray
    Bbar2: np.ndarray
    Btilde2: np.ndarray
    Cbar1: np.ndarray
    Cbar2: np.ndarray
    Dbar11: np.ndarray
    Dbar12: np.ndarray
    r1: int
    r2: int
    PsiBar: np.ndarray
    Dhat2: float
    D: np.ndarray
    deterministic: bool = False

    @property
    def size(self) -> int:
        return self.Abar.shape[0]

    @property
    def noise_direction(self) -> np.ndarray:
        """Abar^(r2-1) Bbar2"""
        return np.linalg.matrix_power(self.Abar, self.r2 - 1) @ self.Bbar2

    def _phi(self, B: np.ndarray, r: int, X: np.ndarray) -> float:
        """B'A'^(r-1) X A^(r-1) B + sum_{j<r-1} |C1 A^j B|^2"""
        total: float = 0.0
        v: np.ndarray = B
        for _ in range(r - 1):
            total += float(np.sum((self.Cbar1 @ v) ** 2))
            v = self.Abar @ v
        return total + float(v.T @ X @ v)

    def phi0(self, X: np.ndarray) -> float:
        """Disturbance-side cost functional"""
        return self._phi(self.Bbar1, self.r1, X)

    def phi1(self, X: np.ndarray) -> float:
        """Uncertainty-side cost functional including the factor feedthrough"""
        return self._phi(self.Bbar2, self.r2, X) + self.Dhat2 ** 2 * float(np.sum(self.D ** 2))


def build_augmented_plant(plant: Plant, spectral: SpectralModel) -> AugmentedPlant:
    """Realization of the plant cascaded with [H Phi] on n + tau states"""
    n: int = plant.n
    tau: int = spectral.horizon
    p: int = plant.p
    size: int = n + tau

    if not spectral.deterministic and spectral.Dhat2 == 0:
        raise StructuralError("spectral factor has zero feedthrough")

    Abar: np.ndarray = np.zeros((size, size))
    Abar[:n, :n] = plant.A
    Abar[:n, n:] = plant.B2 @ spectral.Chat
    Abar[n:, n:] = spectral.Ahat

    Bbar1: np.ndarray = np.vstack([plant.B1, np.zeros((tau, 1))])
    Bbar2: np.ndarray = np.vstack([plant.B2 * spectral.Dhat2, spectral.Bhat2])
    Btilde2: np.ndarray = np.vstack([plant.B2 * spectral.Dhat1, spectral.Bhat1])

    Cbar1: np.ndarray = np.zeros((p + 1, size))
    Cbar1[:p, :n] = plant.C1
    Cbar1[:p, n:] = plant.D @ spectral.Chat
    Cbar2: np.ndarray = np.hstack([plant.C2, np.zeros((plant.q, tau))])

    Dbar11: np.ndarray = np.zeros((p + 1, 2))
    Dbar11[:p, 1:] = plant.D * spectral.Dhat2
    Dbar12: np.ndarray = np.vstack([plant.D * spectral.Dhat1, np.zeros((1, 1))])

    r1: int = relative_degree(plant.A, plant.B1, plant.C2)
    r2: int = relative_degree(plant.A, plant.B2, plant.C2)
    if relative_degree(Abar, Bbar1, Cbar2) != r1:
        raise StructuralError("augmentation changed the disturbance relative degree")

    columns: List[np.ndarray] = [np.linalg.matrix_power(Abar, r1 - 1) @ Bbar1]
    if not spectral.deterministic:
        if relative_degree(Abar, Bbar2, Cbar2) != r2:
            raise StructuralError("augmentation changed the control relative degree")
        columns.append(np.linalg.matrix_power(Abar, r2 - 1) @ Bbar2)

    return AugmentedPlant(
        Abar=Abar,
        Bbar1=Bbar1,
        Bbar2=Bbar2,
        Btilde2=Btilde2,
        Cbar1=Cbar1,
        Cbar2=Cbar2,
        Dbar11=Dbar11,
        Dbar12=Dbar12,
        r1=r1,
        r2=r2,
        PsiBar=np.hstack(columns),
        Dhat2=spectral.Dhat2,
        D=plant.D,
        deterministic=spectral.deterministic,
    )


def phi0(aug: AugmentedPlant, X: np.ndarray) -> float:
    """Disturbance-side cost functional"""
    return aug.phi0(X)


def phi1(aug: AugmentedPlant, X: np.ndarray) -> float:
    """Uncertainty-side cost functional"""
    return aug.phi1(X)


def optimal_state_feedback(aug: AugmentedPlant, X: np.ndarray) -> np.ndarray:
    """F = -(M(X) + Bt'XBt)^-1 (Bt'XA + D12'C1)"""
    return mare_problem(aug, mare_weight(aug, X)).gain(X)


def _left_inverse(M: np.ndarray) -> np.ndarray:
    """Generalized inverse of a full-column-rank matrix"""
    sv: np.ndarray = np.linalg.svd(M, compute_uv=False)
    if sv.size < M.shape[1] or sv[-1] <= TOL_RANK * sv[0]:
        raise StructuralError(
            f"C2 Psi is rank deficient (singular values {np.array2string(sv, precision=3)})"
        )
    return np.linalg.pinv(M, rcond=TOL_RANK)


def _stabilized_update(aug: AugmentedPlant, update: np.ndarray, pseudo: np.ndarray) -> np.ndarray:
    """
    Measurement update G with G C2 Psi = Psi and (I - G C2) A stable.

    Outputs outside the range of C2 Psi carry no disturbance, so
    G = Psi (C2 Psi)^+ + W (I - C2 Psi (C2 Psi)^+) recovers the disturbance
    exactly for every W. W is the dual LQR gain of the remaining error
    dynamics.
    """
    size: int = aug.size
    outputs: int = aug.Cbar2.shape[0]
    complement: np.ndarray = np.eye(outputs) - aug.Cbar2 @ aug.PsiBar @ pseudo
    if np.max(np.abs(complement), initial=0.0) <= TOL_RANK:
        return update

    error: np.ndarray = (np.eye(size) - update @ aug.Cbar2) @ aug.Abar
    spare: np.ndarray = complement @ aug.Cbar2 @ aug.Abar
    try:
        gain, _, _ = control.dlqr(error.T, spare.T, np.eye(size), np.eye(outputs))
    except (ValueError, np.linalg.LinAlgError) as ex:
        raise StructuralError(f"no stabilizing observer recovers the disturbance: {ex}")
    return update + np.asarray(gain).T @ complement


def observer_gains(aug: AugmentedPlant, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """L = -A G, L0 = F G with the measurement update G = Psi (C2 Psi)^+"""
    pseudo: np.ndarray = _left_inverse(aug.Cbar2 @ aug.PsiBar)
    update: np.ndarray = aug.PsiBar @ pseudo

    observer: np.ndarray = aug.Abar - aug.Abar @ update @ aug.Cbar2
    if spectral_radius(observer) >= 1:
        logger.info("observer radius %.6g, using the spare outputs to stabilize it", spectral_radius(observer))
        update = _stabilized_update(aug, update, pseudo)
        observer = aug.Abar - aug.Abar @ update @ aug.Cbar2
        if spectral_radius(observer) >= 1:
            raise StructuralError(
                f"observer is not stable, spectral radius {spectral_radius(observer):.6g}"
            )

    L: np.ndarray = -aug.Abar @ update
    L0: np.ndarray = np.atleast_2d(F) @ update
    return L, L0


def assemble_controller(
    aug: AugmentedPlant, F: np.ndarray, L: np.ndarray, L0: np.ndarray
) -> control.StateSpace:
    """Observer-based controller of order n + tau"""
    A: np.ndarray = aug.Abar
    B: np.ndarray = aug.Btilde2
    C2: np.ndarray = aug.Cbar2

    A_K: np.ndarray = A + B @ F + L @ C2 - B @ L0 @ C2
    B_K: np.ndarray = B @ L0 - L
    C_K: np.ndarray = F - L0 @ C2
    D_K: np.ndarray = L0
    return control.ss(A_K, B_K, C_K, D_K, True)


def static_controller(gain: np.ndarray) -> control.StateSpace:
    """Memoryless controller u = gain y"""
    gain = np.atleast_2d(gain)
    return control.ss(
        np.zeros((0, 0)), np.zeros((0, gain.shape[1])), np.zeros((gain.shape[0], 0)), gain, True
    )


def optimal_cost(plant: Plant, X: np.ndarray) -> float:
    """Minimum mean-square H2 cost from the plant block of X"""
    n: int = plant.n
    X11: np.ndarray = X[:n, :n]
    r1: int = relative_degree(plant.A, plant.B1, plant.C2)

    cost: float = 0.0
    v: np.ndarray = plant.B1
    for _ in range(r1 - 1):
        cost += float(np.sum((plant.C1 @ v) ** 2))
        v = plant.A @ v
    return cost + float(v.T @ X11 @ v)


def erasure_closed_forms(unstable: Sequence[complex], e: float) -> Tuple[bool, float]:
    """Stabilizability threshold and minimum control power over an erasure channel"""
    product: float = float(np.prod(np.abs(np.asarray(list(unstable), dtype=complex)))) if len(unstable) else 1.0
    squared: float = product ** 2
    stabilizable: bool = e < 1 / squared
    if not stabilizable:
        return False, np.inf
    return True, (squared - 1) / (1 - e * squared)


@dataclass(frozen=True)
class AnalysisWeights:
    """Scalarization weights of the auxiliary design problem"""

    sigma0: float = 1.0
    gamma: float = 1.0
    lambda0: float = np.sqrt(0.5)
    lambda1: float = np.sqrt(0.5)

    def __post_init__(self) -> None:
        """Constructor"""
        if self.sigma0 <= 0 or self.gamma <= 0:
            raise ValidationError("sigma0 and gamma must be positive", field="sigma0")
        if abs(self.lambda0 ** 2 + self.lambda1 ** 2 - 1) > 1e-12:
            raise ValidationError("lambda0^2 + lambda1^2 must equal 1", field="lambda0")


@dataclass
class SynthesisResult:
    """Optimal controller and its certificates"""

    status: SynthesisStatus
    mode: FeedbackMode
    mare: MareSolution
    aug: AugmentedPlant
    spectral: SpectralModel
    X: np.ndarray = None
    F: np.ndarray = None
    L: np.ndarray = None
    L0: np.ndarray = None
    K: control.StateSpace = None
    J_opt: float = np.inf
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == SynthesisStatus.FEASIBLE

    @property
    def order(self) -> Optional[int]:
        if self.K is None:
            return None
        return self.K.nstates


def design_controller(
    plant: Plant,
    noise: NoiseModel,
    mode: FeedbackMode = FeedbackMode.OUTPUT,
    method: str = "bracket",
) -> SynthesisResult:
    """Mean-square H2 optimal controller for the plant over the noisy input"""
    if mode == FeedbackMode.STATE:
        if noise.horizon:
            raise ValidationError("state feedback needs a memoryless channel", field="feedback")
        if np.linalg.matrix_rank(plant.C2) < plant.n:
            raise ValidationError("state feedback needs full-column-rank C2", field="C2")

    spectral: SpectralModel = build_spectral_model(noise)
    aug: AugmentedPlant = build_augmented_plant(plant, spectral)
    mare: MareSolution = solve_mare(aug, method=method)

    if not mare.stabilizing:
        return SynthesisResult(
            status=SynthesisStatus.INFEASIBLE,
            mode=mode,
            mare=mare,
            aug=aug,
            spectral=spectral,
            diagnostics=dict(mare.diagnostics),
        )

    X: np.ndarray = mare.X
    F: np.ndarray = mare.F

    if mode == FeedbackMode.STATE:
        L: np.ndarray = np.zeros((aug.size, plant.q))
        L0: np.ndarray = F @ np.linalg.pinv(plant.C2)
        K: control.StateSpace = static_controller(L0)
    else:
        L, L0 = observer_gains(aug, F)
        K = assemble_controller(aug, F, L, L0)

    return SynthesisResult(
        status=SynthesisStatus.FEASIBLE,
        mode=mode,
        mare=mare,
        aug=aug,
        spectral=spectral,
        X=X,
        F=F,
        L=L,
        L0=L0,
        K=K,
        J_opt=optimal_cost(plant, X),
    )


@dataclass
class GammaDesign:
    """Optimal controller of the auxiliary plant for fixed weights"""

    weights: AnalysisWeights
    X: np.ndarray
    F: np.ndarray
    L: np.ndarray
    L0: np.ndarray
    K: control.StateSpace
    cost: float
    phi0: float
    phi1: float


def gamma_design(aug: AugmentedPlant, weights: AnalysisWeights) -> GammaDesign:
    """Controller and cost of the auxiliary problem with M frozen at D12'D12 + gamma^2"""
    weight: float = float(np.sum(aug.Dbar12 ** 2)) + weights.gamma ** 2
    problem: DareProblem = mare_problem(aug, weight)
    X, F = solve_dare(problem)
    L, L0 = observer_gains(aug, F)
    K: control.StateSpace = assemble_controller(aug, F, L, L0)

    value0: float = aug.phi0(X)
    value1: float = aug.phi1(X)
    cost: float = (
        weights.lambda0 ** 2 * weights.sigma0 ** 2 * value0
        + weights.lambda1 ** 2 * value1 / weights.gamma ** 2
    )
    return GammaDesign(
        weights=weights, X=X, F=F, L=L, L0=L0, K=K, cost=cost, phi0=value0, phi1=value1
    )


def explicit_observer_riccati(
    aug: AugmentedPlant, weights: AnalysisWeights
) -> Tuple[np.ndarray, float]:
    """Closed-form stabilizing solution of the filtering DARE and its scaled residual"""
    A: np.ndarray = aug.Abar
    C: np.ndarray = aug.Cbar2
    w1: float = weights.sigma0 ** 2 * weights.lambda0 ** 2
    w2: float = weights.lambda1 ** 2 / weights.gamma ** 2

    Y: np.ndarray = np.zeros_like(A)
    v: np.ndarray = aug.Bbar1
    for _ in range(aug.r1):
        Y += w1 * v @ v.T
        v = A @ v
    if not aug.deterministic:
        v = aug.Bbar2
        for _ in range(aug.r2):
            Y += w2 * v @ v.T
            v = A @ v

    output: np.ndarray = C @ Y @ C.T
    correction: np.ndarray = A @ Y @ C.T @ np.linalg.pinv(output, rcond=TOL_RANK, hermitian=True) @ C @ Y @ A.T
    rhs: np.ndarray = (
        A @ Y @ A.T
        + w1 * aug.Bbar1 @ aug.Bbar1.T
        + w2 * aug.Bbar2 @ aug.Bbar2.T
        - correction
    )
    residual: float = float(np.linalg.norm(Y - rhs) / (1 + np.linalg.norm(Y)))
    return Y, residual
