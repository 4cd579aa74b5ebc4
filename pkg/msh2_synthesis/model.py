"""
Plants, quasi-colored multiplicative noise and the standing assumptions.

The plant is

    x(k+1) = A x(k) + B1 w(k) + B2 u_d(k)
    z(k)   = C1 x(k) + D u_d(k)
    y(k)   = C2 x(k)

with scalar w and u_d. The corrupted input u_d is the response of a causal
FIR stochastic system to the controller output u, described by the per-lag
means mu_i and the same-source covariances beta_{i,j}.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .base import (
    TOL_RANK,
    TOL_CIRCLE,
    TOL_PSD,
    TOL_SIMPLEX,
    FeedbackMode,
    StructuralError,
    ValidationError,
)


logger = logging.getLogger(__name__)


def as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    """Coerce to a float matrix of the declared shape"""
    try:
        mat: np.ndarray = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} is not numeric", field=name)

    if mat.size == rows * cols and mat.ndim <= 1:
        mat = mat.reshape(rows, cols)

    if mat.shape != (rows, cols):
        raise ValidationError(
            f"{name} has shape {mat.shape}, expected {(rows, cols)}", field=name
        )
    if not np.all(np.isfinite(mat)):
        raise ValidationError(f"{name} contains non-finite entries", field=name)

    mat.setflags(write=False)
    return mat


def spectral_radius(A: np.ndarray) -> float:
    """Largest eigenvalue modulus (0 for an empty matrix)"""
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def evaluate_fir(coef: Sequence[float], z: complex) -> complex:
    """Evaluate sum_i coef[i] z^{-i}"""
    return complex(sum(c * z ** (-i) for i, c in enumerate(coef)))


@dataclass(frozen=True)
class Plant:
    """Single-input plant driven by a corrupted control signal"""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D: np.ndarray

    def __post_init__(self) -> None:
        """Coerce and cross-check dimensions"""
        A: np.ndarray = np.atleast_2d(np.array(self.A, dtype=float))
        n: int = A.shape[0]
        C1: np.ndarray = np.atleast_2d(np.array(self.C1, dtype=float))
        C2: np.ndarray = np.atleast_2d(np.array(self.C2, dtype=float))
        p: int = C1.shape[0]
        q: int = C2.shape[0]

        object.__setattr__(self, "A", as_matrix(A, n, n, "A"))
        object.__setattr__(self, "B1", as_matrix(self.B1, n, 1, "B1"))
        object.__setattr__(self, "B2", as_matrix(self.B2, n, 1, "B2"))
        object.__setattr__(self, "C1", as_matrix(C1, p, n, "C1"))
        object.__setattr__(self, "C2", as_matrix(C2, q, n, "C2"))
        object.__setattr__(self, "D", as_matrix(self.D, p, 1, "D"))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C1.shape[0]

    @property
    def q(self) -> int:
        return self.C2.shape[0]

    def unstable_poles(self) -> List[complex]:
        """Eigenvalues of A strictly outside the unit circle"""
        eigs: np.ndarray = np.linalg.eigvals(self.A)
        return [complex(lam) for lam in eigs if abs(lam) > 1 + TOL_CIRCLE]


@dataclass(frozen=True)
class NoiseModel:
    """First- and second-order description of the FIR multiplicative noise"""

    mu: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        """Validate moments"""
        mu: np.ndarray = np.atleast_1d(np.array(self.mu, dtype=float)).ravel()
        size: int = mu.size
        if size == 0:
            raise ValidationError("mu must hold at least one lag", field="mu")

        beta: np.ndarray = as_matrix(self.beta, size, size, "beta")
        scale: float = 1.0 + float(np.max(np.abs(beta)))

        if np.max(np.abs(beta - beta.T)) > 1e-12 * scale:
            raise ValidationError("beta is not symmetric", field="beta")

        diag: np.ndarray = np.diag(beta)
        if np.any(diag < TOL_PSD):
            index: int = int(np.argmin(diag))
            raise ValidationError(
                f"beta has negative variance at lag {index}", field="beta", index=index
            )

        smallest: float = float(np.min(np.linalg.eigvalsh((beta + beta.T) / 2)))
        if smallest < TOL_PSD * scale:
            raise ValidationError(
                f"beta is not positive semidefinite (eigenvalue {smallest:.3e})",
                field="beta",
            )

        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)

    @property
    def horizon(self) -> int:
        return self.mu.size - 1

    @property
    def deterministic(self) -> bool:
        return not np.any(self.beta)


def delay_channel_noise(weights: Sequence[float], probs: Sequence[float]) -> NoiseModel:
    """Noise induced by a random-delay channel with time-stamped weighting"""
    alpha: np.ndarray = np.array(weights, dtype=float).ravel()
    p: np.ndarray = np.array(probs, dtype=float).ravel()

    if alpha.size != p.size:
        raise ValidationError(
            f"{alpha.size} weights for {p.size} delay probabilities", field="p"
        )

    for i, pi in enumerate(p):
        if not 0 <= pi <= 1:
            raise ValidationError(
                f"delay probability p[{i}]={pi} outside [0, 1]", field="p", index=i
            )

    total: float = float(np.sum(p))
    if abs(total - 1) > TOL_SIMPLEX:
        raise ValidationError(
            f"delay probabilities sum to {total!r}, not 1",
            field="p",
            index=int(np.argmax(p)),
        )

    mu: np.ndarray = alpha * p
    beta: np.ndarray = np.diag(alpha ** 2 * p) - np.outer(mu, mu)
    return NoiseModel(mu=mu, beta=beta)


def erasure_channel_noise(e: float) -> NoiseModel:
    """Memoryless Bernoulli(1-e) gain"""
    if not 0 <= e <= 1:
        raise ValidationError(f"erasure probability {e} outside [0, 1]", field="e")
    return NoiseModel(mu=[1 - e], beta=[[e * (1 - e)]])


def relative_degree(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> int:
    """Smallest r >= 1 with C A^{r-1} B nonzero"""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    C = np.atleast_2d(C)
    n: int = A.shape[0]
    if B.shape[0] != n or C.shape[1] != n:
        raise ValidationError(
            f"inconsistent dimensions A{A.shape}, B{B.shape}, C{C.shape}"
        )

    power: np.ndarray = np.eye(n)
    norm_b: float = np.linalg.norm(B, 2)
    norm_c: float = np.linalg.norm(C, 2)

    for j in range(n):
        markov: np.ndarray = C @ power @ B
        scale: float = norm_c * np.linalg.norm(power, 2) * norm_b
        if scale > 0 and np.linalg.norm(markov, 2) > TOL_RANK * scale:
            return j + 1
        power = power @ A

    raise StructuralError("channel is identically zero: no relative degree up to n")


def _rank_margin(M: np.ndarray) -> Tuple[bool, float, bool]:
    """Full-rank test with scale-aware threshold: (full, margin, ambiguous)"""
    scale: float = float(np.max(np.abs(M))) if M.size else 0.0
    if scale == 0:
        return False, 0.0, False

    sv: np.ndarray = la.svdvals(M)
    smallest: float = float(sv[min(M.shape) - 1]) if sv.size >= min(M.shape) else 0.0
    threshold: float = TOL_RANK * scale
    ambiguous: bool = threshold / 10 < smallest <= threshold * 10
    return smallest > threshold, smallest / scale, ambiguous


def invariant_zeros(
    A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray = None
) -> List[complex]:
    """Finite zeros of the system pencil [[A - zI, B], [C, D]]"""
    n: int = A.shape[0]
    m: int = B.shape[1]
    q: int = C.shape[0]
    if D is None:
        D = np.zeros((q, m))

    pencil: np.ndarray = np.block([[A, B], [C, D]])
    rng: np.random.Generator = np.random.default_rng(0)

    # Square down non-square pencils; spurious candidates are removed below
    if q > m:
        R: np.ndarray = rng.standard_normal((m, q))
        M: np.ndarray = np.block([[A, B], [R @ C, R @ D]])
    elif q < m:
        R = rng.standard_normal((m, q))
        M = np.block([[A, B @ R], [C, D @ R]])
    else:
        M = pencil

    size: int = M.shape[0]
    N: np.ndarray = np.zeros((size, size))
    N[:n, :n] = np.eye(n)

    candidates: np.ndarray = la.eigvals(M, N)
    finite: List[complex] = [
        complex(z) for z in candidates if np.isfinite(z) and abs(z) < 1e8
    ]

    def pencil_at(z: complex) -> np.ndarray:
        shift: np.ndarray = np.zeros_like(pencil, dtype=complex)
        shift[:n, :n] = z * np.eye(n)
        return pencil - shift

    normal_rank: int = np.linalg.matrix_rank(pencil_at(0.3137 + 0.7071j))
    scale: float = 1.0 + float(np.max(np.abs(pencil)))
    return [
        z
        for z in finite
        if np.linalg.matrix_rank(pencil_at(z), tol=1e-7 * scale) < normal_rank
    ]


@dataclass
class AssumptionReport:
    """Outcome of the standing-assumption checks"""

    stabilizable_AB2: bool
    no_unit_circle_unobservable_AC1: bool
    detectable_AC2: bool
    no_unit_circle_unstabilizable: bool
    H_nonzero_at_unstable_poles: bool
    Gy_minimum_phase: bool
    C2Psi_full_column_rank: bool
    r1: Optional[int]
    r2: Optional[int]
    unstable_poles: List[complex]
    margins: Dict[str, float] = field(default_factory=dict)
    ambiguous: List[str] = field(default_factory=list)
    mode: FeedbackMode = FeedbackMode.OUTPUT
    full_state_measurement: Optional[bool] = None

    def checks(self) -> Dict[str, bool]:
        """Checks that decide the verdict in the report's mode"""
        checks: Dict[str, bool] = {
            "stabilizable_AB2": self.stabilizable_AB2,
            "no_unit_circle_unobservable_AC1": self.no_unit_circle_unobservable_AC1,
            "detectable_AC2": self.detectable_AC2,
            "no_unit_circle_unstabilizable": self.no_unit_circle_unstabilizable,
            "H_nonzero_at_unstable_poles": self.H_nonzero_at_unstable_poles,
        }
        if self.mode == FeedbackMode.STATE:
            checks["full_state_measurement"] = bool(self.full_state_measurement)
        else:
            checks["Gy_minimum_phase"] = self.Gy_minimum_phase
            checks["C2Psi_full_column_rank"] = self.C2Psi_full_column_rank
        return checks

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def failures(self) -> List[str]:
        """Names of failed checks"""
        return [name for name, ok in self.checks().items() if not ok]


def validate_assumptions(
    plant: Plant, H: Sequence[float], mode: FeedbackMode = FeedbackMode.OUTPUT
) -> AssumptionReport:
    """Check stabilizability, detectability, mean-system and zero conditions"""
    A: np.ndarray = plant.A
    n: int = plant.n
    eigs: np.ndarray = np.linalg.eigvals(A)
    margins: Dict[str, float] = {}
    ambiguous: List[str] = []

    def pbh(name: str, modes: List[complex], other: np.ndarray, rows: bool) -> bool:
        """Popov-Belevitch-Hautus test at the given modes"""
        ok: bool = True
        worst: float = np.inf
        for lam in modes:
            shifted: np.ndarray = lam * np.eye(n) - A
            M: np.ndarray = np.hstack([shifted, other]) if rows else np.vstack([shifted, other])
            full, margin, fuzzy = _rank_margin(M)
            ok = ok and full
            worst = min(worst, margin)
            if fuzzy:
                ambiguous.append(name)
        margins[name] = float(worst) if modes else np.inf
        return ok

    non_stable: List[complex] = [lam for lam in eigs if abs(lam) >= 1 - TOL_CIRCLE]
    on_circle: List[complex] = [lam for lam in eigs if abs(abs(lam) - 1) <= TOL_CIRCLE]
    unstable: List[complex] = plant.unstable_poles()

    B12: np.ndarray = np.hstack([plant.B1, plant.B2])

    stabilizable: bool = pbh("stabilizable_AB2", non_stable, plant.B2, rows=True)
    observable_c1: bool = pbh("no_unit_circle_unobservable_AC1", on_circle, plant.C1, rows=False)
    detectable: bool = pbh("detectable_AC2", non_stable, plant.C2, rows=False)
    circle_stabilizable: bool = pbh("no_unit_circle_unstabilizable", on_circle, B12, rows=True)

    # Mean system at the unstable poles
    coef: np.ndarray = np.asarray(H, dtype=float).ravel()
    h_scale: float = float(np.max(np.abs(coef))) if coef.size else 0.0
    h_values: List[float] = [abs(evaluate_fir(coef, lam)) for lam in unstable]
    h_margin: float = min(h_values) if h_values else np.inf
    margins["H_nonzero_at_unstable_poles"] = h_margin
    h_ok: bool = h_margin > TOL_RANK * max(h_scale, 1e-300)

    # Relative degrees and left invertibility
    r1: Optional[int] = None
    r2: Optional[int] = None
    try:
        r1 = relative_degree(A, plant.B1, plant.C2)
        r2 = relative_degree(A, plant.B2, plant.C2)
    except StructuralError:
        logger.warning("zero channel from w or u_d to y")

    c2psi_ok: bool = False
    if r1 is not None and r2 is not None:
        Psi: np.ndarray = np.hstack([
            np.linalg.matrix_power(A, r1 - 1) @ plant.B1,
            np.linalg.matrix_power(A, r2 - 1) @ plant.B2,
        ])
        c2psi_ok, margin, fuzzy = _rank_margin(plant.C2 @ Psi)
        margins["C2Psi_full_column_rank"] = margin
        if fuzzy:
            ambiguous.append("C2Psi_full_column_rank")

    zeros: List[complex] = invariant_zeros(A, B12, plant.C2)
    worst_zero: float = max((abs(z) for z in zeros), default=0.0)
    margins["Gy_minimum_phase"] = 1 - worst_zero
    minimum_phase: bool = worst_zero <= 1 + TOL_CIRCLE

    full_state: Optional[bool] = None
    if mode == FeedbackMode.STATE:
        full_state, margin, fuzzy = _rank_margin(plant.C2)
        full_state = full_state and plant.q >= n
        margins["full_state_measurement"] = margin
        if fuzzy:
            ambiguous.append("full_state_measurement")

    for name in ambiguous:
        logger.warning("rank test %s is within the tolerance band", name)

    return AssumptionReport(
        stabilizable_AB2=stabilizable,
        no_unit_circle_unobservable_AC1=observable_c1,
        detectable_AC2=detectable,
        no_unit_circle_unstabilizable=circle_stabilizable,
        H_nonzero_at_unstable_poles=h_ok,
        Gy_minimum_phase=minimum_phase,
        C2Psi_full_column_rank=c2psi_ok,
        r1=r1,
        r2=r2,
        unstable_poles=unstable,
        margins=margins,
        ambiguous=ambiguous,
        mode=mode,
        full_state_measurement=full_state,
    )
