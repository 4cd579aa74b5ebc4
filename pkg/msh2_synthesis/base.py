from enum import Enum


APP_NAME = "Msh2Synthesis"


# Tolerances
TOL_RANK = 1e-9
TOL_CIRCLE = 1e-9
TOL_PSD = -1e-10
TOL_SIMPLEX = 1e-12
TOL_PAIR = 1e-6
TOL_MARGINAL = 1e-8
TOL_ITER = 1e-11
TOL_RESIDUAL = 1e-9

MAX_ITER = 10000
DIVERGENCE_GUARD = 1e12
FREQ_GRID = 1024

# Monte-Carlo defaults
HORIZON = 2000
BURN_IN = 200
BLOCK_SIZE = 500


class FeedbackMode(Enum):
    """Controller structure"""

    OUTPUT = "output"
    STATE = "state"


class Verdict(Enum):
    """Stability verdict"""

    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


class SynthesisStatus(Enum):
    """Synthesis outcome"""

    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    FAILED = "Failed"


def classify(margin: float) -> Verdict:
    """Map a stability margin (positive means stable) to a verdict"""
    if abs(margin) < TOL_MARGINAL:
        return Verdict.MARGINAL
    if margin > 0:
        return Verdict.STABLE
    return Verdict.UNSTABLE


class Msh2Error(Exception):
    """Root of all toolkit errors"""


class ValidationError(Msh2Error):
    """Input or precondition violation"""

    def __init__(self, msg: str, field: str = "", index: int = None) -> None:
        """Constructor"""
        super().__init__(msg)
        self.field: str = field
        self.index: int = index


class StructuralError(Msh2Error):
    """Zero channel or rank deficiency"""


class FactorizationError(Msh2Error):
    """Spectral factorization failure"""

    def __init__(self, msg: str, frequency: float = None) -> None:
        """Constructor"""
        super().__init__(msg)
        self.frequency: float = frequency


class RiccatiError(Msh2Error):
    """Riccati solver failure"""

    def __init__(self, msg: str, diagnostics: dict = None) -> None:
        """Constructor"""
        super().__init__(msg)
        self.diagnostics: dict = diagnostics or {}


class InstabilityError(Msh2Error):
    """Stable dynamics required but not found"""

    def __init__(self, msg: str, eigenvalues=None) -> None:
        """Constructor"""
        super().__init__(msg)
        self.eigenvalues = eigenvalues


class NumericalError(Msh2Error):
    """Singular or indefinite inner matrix"""


class InfeasibleError(Msh2Error):
    """Plant is not mean-square stabilizable over the channel"""
