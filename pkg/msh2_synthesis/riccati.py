"""
Lyapunov, H2 norm, DARE and MARE solvers.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .base import (
    TOL_ITER,
    TOL_RESIDUAL,
    MAX_ITER,
    DIVERGENCE_GUARD,
    InstabilityError,
    NumericalError,
    RiccatiError,
    ValidationError,
)
from .model import spectral_radius

if TYPE_CHECKING:
    from .synthesis import AugmentedPlant


logger = logging.getLogger(__name__)


def solve_dlyap(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """P with P = A P A' + Q"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if A.size == 0:
        return np.zeros((0, 0))

    radius: float = spectral_radius(A)
    if radius >= 1:
        raise InstabilityError(
            f"Lyapunov equation needs a stable matrix, spectral radius {radius:.6g}",
            eigenvalues=np.linalg.eigvals(A),
        )

    P: np.ndarray = la.solve_discrete_lyapunov(A, Q)
    return (P + P.T) / 2


def h2_norm_sq(sys) -> float:
    """Squared H2 norm of a stable discrete-time system (or an (A, B, C, D) tuple)"""
    if isinstance(sys, tuple):
        A, B, C, D = (np.atleast_2d(np.asarray(m, dtype=float)) for m in sys)
    else:
        A, B, C, D = (np.asarray(m, dtype=float) for m in (sys.A, sys.B, sys.C, sys.D))

    feedthrough: float = float(np.sum(D ** 2))
    if A.size == 0:
        return feedthrough

    P: np.ndarray = solve_dlyap(A, B @ B.T)
    return float(np.trace(C @ P @ C.T)) + feedthrough


@dataclass
class DareProblem:
    """X = A'XA + Q - (A'XB + S)(R + B'XB)^-1 (B'XA + S')"""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray = None
    R: float = 1.0

    def __post_init__(self) -> None:
        """Constructor"""
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        size: int = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(size, -1)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if self.S is None:
            self.S = np.zeros_like(self.B)
        self.S = np.asarray(self.S, dtype=float).reshape(self.B.shape)
        self.R = float(np.squeeze(self.R))

        if self.A.shape != (size, size) or self.Q.shape != (size, size):
            raise ValidationError(f"DARE data of inconsistent size A{self.A.shape}, Q{self.Q.shape}")
        if np.max(np.abs(self.Q - self.Q.T), initial=0.0) > 1e-12 * (1 + np.max(np.abs(self.Q), initial=0.0)):
            raise ValidationError("DARE state weight is not symmetric", field="Q")

    def normalized(self) -> "DareProblem":
        """Same equation divided by R; its solution is X / R"""
        return DareProblem(A=self.A, B=self.B, Q=self.Q / self.R, S=self.S / self.R, R=1.0)

    def inner(self, X: np.ndarray) -> float:
        """R + B'XB"""
        return self.R + float(self.B.T @ X @ self.B)

    def gain(self, X: np.ndarray) -> np.ndarray:
        """F = -(R + B'XB)^-1 (B'XA + S')"""
        inner: float = self.inner(X)
        if inner <= 0:
            raise NumericalError(f"R + B'XB = {inner:.3e} is not positive")
        return -(self.B.T @ X @ self.A + self.S.T) / inner

    def update(self, X: np.ndarray) -> np.ndarray:
        """Right-hand side of the Riccati equation"""
        cross: np.ndarray = self.A.T @ X @ self.B + self.S
        inner: float = self.inner(X)
        if inner <= 0:
            raise NumericalError(f"R + B'XB = {inner:.3e} is not positive")
        X_next: np.ndarray = self.A.T @ X @ self.A + self.Q - cross @ cross.T / inner
        return (X_next + X_next.T) / 2

    def residual(self, X: np.ndarray) -> float:
        """Scaled residual ||X - update(X)|| / (1 + ||X||)"""
        return float(np.linalg.norm(X - self.update(X)) / (1 + np.linalg.norm(X)))


def _solve_dare_iter(problem: DareProblem) -> Tuple[np.ndarray, int]:
    """Value iteration from Q"""
    X: np.ndarray = problem.Q.copy()
    for iteration in range(1, MAX_ITER + 1):
        X_next: np.ndarray = problem.update(X)
        step: float = np.linalg.norm(X_next - X)
        X = X_next
        if step < TOL_ITER * (1 + np.linalg.norm(X)):
            return X, iteration
        if np.linalg.norm(X) > DIVERGENCE_GUARD:
            break
    raise RiccatiError(
        "Riccati iteration did not converge",
        diagnostics={"iterations": iteration, "norm": float(np.linalg.norm(X))},
    )


def solve_dare(problem: DareProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Stabilizing solution and gain of a single-input DARE"""
    A: np.ndarray = problem.A
    if A.size == 0:
        return np.zeros((0, 0)), np.zeros((1, 0))

    # Unit control weight keeps large MARE weights well conditioned
    scale: float = problem.R if problem.R > 0 else 1.0
    unit: DareProblem = problem.normalized() if problem.R > 0 else problem

    try:
        X: np.ndarray = scale * la.solve_discrete_are(
            A, unit.B, unit.Q, np.array([[unit.R]]), s=unit.S
        )
        X = (X + X.T) / 2
        if problem.residual(X) > TOL_RESIDUAL:
            raise ValueError(f"residual {problem.residual(X):.3e}")
    except (ValueError, np.linalg.LinAlgError) as ex:
        logger.debug("scipy DARE failed (%s), falling back to iteration", ex)
        X_unit, _ = _solve_dare_iter(unit)
        X = scale * X_unit

    F: np.ndarray = problem.gain(X)
    residual: float = problem.residual(X)
    radius: float = spectral_radius(A + problem.B @ F)

    if residual > TOL_RESIDUAL or radius >= 1:
        raise RiccatiError(
            "no stabilizing DARE solution",
            diagnostics={"residual": residual, "closed_loop_radius": radius},
        )

    return X, F


@dataclass
class MareSolution:
    """Largest MARE solution and the associated state-feedback gain"""

    X: np.ndarray
    F: np.ndarray
    iterations: int
    residual: float
    stabilizing: bool
    weight: float = np.nan
    ms_gain: float = np.nan
    method: str = "bracket"
    diagnostics: dict = field(default_factory=dict)


def mare_weight(aug: "AugmentedPlant", X: np.ndarray) -> float:
    """M(X) = phi1(X) + Dbar12'Dbar12"""
    return aug.phi1(X) + float(np.sum(aug.Dbar12 ** 2))


def mare_problem(aug: "AugmentedPlant", weight: float) -> DareProblem:
    """DARE obtained by freezing M(X) at the given weight"""
    return DareProblem(
        A=aug.Abar,
        B=aug.Btilde2,
        Q=aug.Cbar1.T @ aug.Cbar1,
        S=aug.Cbar1.T @ aug.Dbar12,
        R=weight,
    )


def mare_residual(aug: "AugmentedPlant", X: np.ndarray) -> float:
    """Scaled MARE residual with M recomputed from X"""
    return mare_problem(aug, mare_weight(aug, X)).residual(X)


def noise_loop_gain(aug: "AugmentedPlant", F: np.ndarray) -> float:
    """Gain ||F (zI - Abar - Btilde2 F)^-1 Abar^(r2-1) Bbar2||^2 seen by white input noise"""
    closed: np.ndarray = aug.Abar + aug.Btilde2 @ F
    if spectral_radius(closed) >= 1:
        return np.inf
    direction: np.ndarray = aug.noise_direction
    if not np.any(direction):
        return 0.0
    return h2_norm_sq((closed, direction, F, np.zeros((1, 1))))


def _finish(
    aug: "AugmentedPlant",
    X: np.ndarray,
    iterations: int,
    method: str,
) -> MareSolution:
    """Gain, residual and stabilizing verdict of a MARE fixed point"""
    weight: float = mare_weight(aug, X)
    problem: DareProblem = mare_problem(aug, weight)
    F: np.ndarray = problem.gain(X)
    residual: float = problem.residual(X)
    gain: float = noise_loop_gain(aug, F)
    radius: float = spectral_radius(aug.Abar + aug.Btilde2 @ F)
    stabilizing: bool = radius < 1 and gain < 1

    logger.debug(
        "MARE %s: weight %.6g, residual %.3e, ms gain %.6g after %d steps",
        method, weight, residual, gain, iterations,
    )
    return MareSolution(
        X=X,
        F=F,
        iterations=iterations,
        residual=residual,
        stabilizing=stabilizing,
        weight=weight,
        ms_gain=gain,
        method=method,
        diagnostics={"closed_loop_radius": radius},
    )


def _not_stabilizable(aug: "AugmentedPlant", X: np.ndarray, iterations: int, method: str, reason: str) -> MareSolution:
    """Verdict for a diverging MARE"""
    logger.info("MARE has no stabilizing solution: %s", reason)
    size: int = aug.Abar.shape[0]
    return MareSolution(
        X=X,
        F=np.zeros((1, size)),
        iterations=iterations,
        residual=np.inf,
        stabilizing=False,
        method=method,
        diagnostics={"reason": reason},
    )


def solve_mare(aug: "AugmentedPlant", method: str = "bracket") -> MareSolution:
    """
    Largest solution of the modified Riccati equation

        X = A'XA + C1'C1 - (A'XB + C1'D12)(M(X) + B'XB)^-1 (B'XA + D12'C1)

    with A = Abar, B = Btilde2 and M(X) = phi1(X) + D12'D12.

    The scalar weight M is the only nonlinearity: for frozen M the equation
    is a standard DARE. "bracket" locates the smallest fixed point of
    m -> M(X_dare(m)) above M(0) with Brent's method, "iteration" runs the
    monotone value iteration started at the DARE solution for M(0).
    """
    size: int = aug.Abar.shape[0]
    zero: np.ndarray = np.zeros((size, size))
    start: float = mare_weight(aug, zero)

    if start <= 0:
        if not np.any(aug.Cbar1) and spectral_radius(aug.Abar) < 1:
            return _finish(aug, zero, 0, method)
        raise NumericalError("MARE has a zero control weight M(0)")

    if method == "iteration":
        return _solve_mare_iter(aug, start)
    if method != "bracket":
        raise ValidationError(f"unknown MARE method {method}", field="method")

    evaluations: int = 0

    def excess(weight: float) -> float:
        """M(X_dare(m)) - m"""
        nonlocal evaluations
        evaluations += 1
        X, _ = solve_dare(mare_problem(aug, weight))
        return mare_weight(aug, X) - weight

    lower: float = start
    try:
        if excess(lower) <= TOL_ITER * lower:
            X, _ = solve_dare(mare_problem(aug, lower))
            return _finish(aug, X, evaluations, method)

        upper: float = 2 * lower
        while excess(upper) > 0:
            lower = upper
            upper *= 2
            if upper > DIVERGENCE_GUARD:
                return _not_stabilizable(aug, zero, evaluations, method, "control weight unbounded")

        weight: float = brentq(excess, lower, upper, xtol=TOL_ITER * lower, rtol=4 * np.finfo(float).eps)
        X, _ = solve_dare(mare_problem(aug, weight))
    except RiccatiError as ex:
        return _not_stabilizable(
            aug, zero, evaluations, method, f"no stabilizing DARE above weight {lower:.6g}: {ex}"
        )
    return _finish(aug, X, evaluations, method)


def _solve_mare_iter(aug: "AugmentedPlant", start: float) -> MareSolution:
    """Monotone value iteration on the MARE"""
    X, _ = solve_dare(mare_problem(aug, start))

    for iteration in range(1, MAX_ITER + 1):
        X_next: np.ndarray = mare_problem(aug, mare_weight(aug, X)).update(X)
        step: float = np.linalg.norm(X_next - X)
        X = X_next

        if step < TOL_ITER * (1 + np.linalg.norm(X)):
            return _finish(aug, X, iteration, "iteration")
        if np.linalg.norm(X) > DIVERGENCE_GUARD:
            return _not_stabilizable(aug, X, iteration, "iteration", "iterates diverged")

    return _not_stabilizable(aug, X, MAX_ITER, "iteration", "no convergence within the iteration limit")
