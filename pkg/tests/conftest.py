import numpy as np
import pytest

from msh2_synthesis import PROBLEM_DIR, SynthesisEngine
from msh2_synthesis.model import Plant, NoiseModel, delay_channel_noise, erasure_channel_noise
from msh2_synthesis.problem import ProblemFile, load_problem


WORKED_A = [[1.1, 0.0, 0.0], [1.0, 1.2, 0.0], [1.0, 0.0, 0.5]]


def worked_plant(epsilon: float = 0.8) -> Plant:
    """Three-state plant with unstable modes 1.1 and 1.2"""
    return Plant(
        A=WORKED_A,
        B1=[[1.0], [0.5 * epsilon], [1.0]],
        B2=[[1.0], [0.0], [1.0]],
        C1=[[0.0, epsilon, 2 * epsilon]],
        C2=[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        D=[[1.0]],
    )


@pytest.fixture
def delay_plant() -> Plant:
    return worked_plant(0.8)


@pytest.fixture
def erasure_plant() -> Plant:
    """Full-state version used for the erasure channel, w entering like u_d"""
    return Plant(
        A=WORKED_A,
        B1=[[1.0], [0.0], [1.0]],
        B2=[[1.0], [0.0], [1.0]],
        C1=[[0.0, 0.0, 0.0]],
        C2=np.eye(3),
        D=[[1.0]],
    )


@pytest.fixture
def scalar_plant() -> Plant:
    """x+ = 1.1 x + w + u_d, z = u_d, y = x"""
    return Plant(A=[[1.1]], B1=[[1.0]], B2=[[1.0]], C1=[[0.0]], C2=[[1.0]], D=[[1.0]])


@pytest.fixture
def delay_noise() -> NoiseModel:
    return delay_channel_noise([1.0, 0.67, 0.0], [0.6, 0.3, 0.1])


@pytest.fixture
def erasure_noise() -> NoiseModel:
    return erasure_channel_noise(0.1)


@pytest.fixture
def engine() -> SynthesisEngine:
    return SynthesisEngine()


@pytest.fixture
def delay_problem() -> ProblemFile:
    return load_problem(PROBLEM_DIR.joinpath("delay_example.json"))


@pytest.fixture
def erasure_problem() -> ProblemFile:
    return load_problem(PROBLEM_DIR.joinpath("erasure_example.json"))


@pytest.fixture
def make_worked_plant():
    return worked_plant
