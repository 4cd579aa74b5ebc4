import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from msh2_synthesis import PROBLEM_DIR
from msh2_synthesis.base import FeedbackMode, ValidationError
from msh2_synthesis.problem import (
    SweepSpec,
    load_controller,
    load_problem,
    parse_problem,
    save_controller,
)


def problem_data() -> dict:
    return json.loads(PROBLEM_DIR.joinpath("delay_example.json").read_text(encoding="utf-8"))


def test_bundled_problems(delay_problem, erasure_problem):
    assert delay_problem.name == "delay_example"
    assert delay_problem.template_name == "DelayChannel"
    assert delay_problem.feedback == FeedbackMode.OUTPUT
    assert delay_problem.sim.runs == 20000
    assert len(delay_problem.sweep.grid) == 10

    assert erasure_problem.template_name == "ErasureChannel"
    assert erasure_problem.feedback == FeedbackMode.STATE
    assert erasure_problem.noise_setting == {"e": 0.1}


def test_affine_sweep_setting():
    spec = SweepSpec("p", [0.3], {"p": {"base": [0.9, 0.0, 0.1], "slope": [-1.0, 1.0, 0.0]}})
    assert_allclose(spec.setting_at(0.3)["p"], [0.6, 0.3, 0.1])
    assert SweepSpec("e", [0.2]).setting_at(0.2) == {"e": 0.2}


def test_missing_field():
    data = problem_data()
    del data["plant"]["C2"]
    with pytest.raises(ValidationError) as info:
        parse_problem(data)
    assert info.value.field == "plant.C2"


def test_malformed_dimensions():
    data = problem_data()
    data["plant"]["n"] = 4
    with pytest.raises(ValidationError) as info:
        parse_problem(data)
    assert info.value.field == "plant.A"

    data = problem_data()
    data["plant"]["q"] = 0
    with pytest.raises(ValidationError):
        parse_problem(data)


def test_unknown_noise_and_feedback():
    data = problem_data()
    data["noise"]["type"] = "fading"
    with pytest.raises(ValidationError):
        parse_problem(data)

    data = problem_data()
    data["feedback"] = "observer"
    with pytest.raises(ValidationError):
        parse_problem(data)

    data = problem_data()
    del data["noise"]["alpha"]
    with pytest.raises(ValidationError):
        parse_problem(data)


def test_bad_sim_block():
    data = problem_data()
    data["sim"]["steps"] = 10
    with pytest.raises(ValidationError):
        parse_problem(data)


def test_non_numeric_sim_block():
    data = problem_data()
    data["sim"]["runs"] = "many"
    with pytest.raises(ValidationError) as info:
        parse_problem(data)
    assert info.value.field == "sim"


@pytest.mark.parametrize(
    "noise, field",
    [
        ({"type": "erasure", "e": "half"}, "noise.e"),
        ({"type": "erasure", "e": [0.1, 0.2]}, "noise.e"),
        ({"type": "delay", "alpha": [1.0, "x", 0.0], "p": [0.6, 0.3, 0.1]}, "noise.alpha"),
        ({"type": "delay", "alpha": [1.0, 0.5], "p": [0.6, 0.3, 0.1]}, "noise.p"),
        ({"type": "custom", "mu": [1.0, 0.5], "beta": [[0.1]]}, "noise.beta"),
    ],
)
def test_noise_fields_are_coerced(noise, field):
    data = problem_data()
    data["noise"] = noise
    with pytest.raises(ValidationError) as info:
        parse_problem(data)
    assert info.value.field == field


def test_noise_setting_is_numeric():
    data = problem_data()
    data["noise"] = {"type": "custom", "mu": [1, 0.5], "beta": [0.1, 0.0, 0.0, 0.05]}
    problem = parse_problem(data)
    assert problem.noise_setting == {"mu": [1.0, 0.5], "beta": [[0.1, 0.0], [0.0, 0.05]]}


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ValidationError):
        load_problem(tmp_path / "absent.json")

    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_problem(path)


def test_controller_file(tmp_path, engine, delay_problem):
    result = engine.synthesize(delay_problem)
    path = tmp_path / "controller.json"
    save_controller(result, path)

    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["order"] == 5
    assert data["mode"] == "output"
    assert data["J_opt"] == pytest.approx(result.J_opt)

    K = load_controller(path)
    assert_allclose(K.A, result.K.A)
    assert_allclose(K.B, result.K.B)
    assert_allclose(K.C, result.K.C)
    assert_allclose(K.D, result.K.D)

    data["order"] = 4
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ValidationError):
        load_controller(path)


def test_static_controller_file(tmp_path, engine, erasure_problem):
    result = engine.synthesize(erasure_problem)
    path = tmp_path / "static.json"
    save_controller(result, path)

    K = load_controller(path)
    assert K.nstates == 0
    assert_allclose(np.asarray(K.D), result.F @ np.linalg.pinv(erasure_problem.plant.C2))
