import logging
from dataclasses import replace

import numpy as np
import pytest

from msh2_synthesis.base import APP_NAME, InfeasibleError, StructuralError, ValidationError
from msh2_synthesis.channels import DelayChannel
from msh2_synthesis.model import Plant
from msh2_synthesis.sim import SimConfig


def test_templates_are_registered(engine):
    assert set(engine.get_channel_template()) == {"DelayChannel", "ErasureChannel", "CustomChannel"}


def test_channel_names_count_up(engine):
    first = engine.create_channel("DelayChannel", {})
    second = engine.create_channel("DelayChannel", {"p": [0.9, 0.0, 0.1]})

    prefix, count = first.channel_name.rsplit("_", 1)
    assert prefix == "DelayChannel"
    assert second.channel_name == f"DelayChannel_{int(count) + 1}"
    assert engine.channels[second.channel_name] is second
    assert second.get_parameters() == {"alpha": [1.0, 0.67, 0.0], "p": [0.9, 0.0, 0.1]}


def test_unknown_template(engine):
    with pytest.raises(ValidationError):
        engine.create_channel("FadingChannel", {})


def test_channel_data(engine):
    channel = engine.create_channel("ErasureChannel", {"e": 0.2})
    data = channel.get_data()
    assert data["display_name"] == "Analog erasure"
    assert data["parameters"] == {"e": 0.2}
    assert data["moments"]["mean_gain"] == pytest.approx(0.8)
    assert data["moments"]["beta"] == pytest.approx([[0.16]])


def test_with_setting_creates_a_new_channel(engine):
    channel = engine.create_channel("DelayChannel", {})
    moved = channel.with_setting({"p": [0.5, 0.4, 0.1]})
    assert isinstance(moved, DelayChannel)
    assert moved.channel_name != channel.channel_name
    assert moved.p == [0.5, 0.4, 0.1]
    assert moved.channel_name not in engine.channels


def test_problem_channel_is_reused(engine, delay_problem):
    first = engine.channel_for(delay_problem)
    assert engine.channel_for(delay_problem) is first

    engine.validate(delay_problem)
    engine.sweep(delay_problem, simulate=False)
    assert list(engine.channels) == [first.channel_name]

    moved = replace(delay_problem, noise_setting={"alpha": [1.0, 0.67, 0.0], "p": [0.5, 0.4, 0.1]})
    second = engine.channel_for(moved)
    assert second is not first
    assert list(engine.channels) == [second.channel_name]


def test_write_log_prefixes_source(engine, caplog):
    channel = engine.create_channel("ErasureChannel", {})
    with caplog.at_level(logging.INFO, logger=APP_NAME):
        engine.write_log("hello", channel)
        engine.write_log("plain")
    assert f"{channel.channel_name}：hello" in caplog.messages
    assert "plain" in caplog.messages


def test_validate(engine, delay_problem, erasure_problem):
    assert engine.validate(delay_problem).passed
    assert engine.validate(erasure_problem).passed


def test_synthesize(engine, delay_problem, caplog):
    with caplog.at_level(logging.INFO, logger=APP_NAME):
        result = engine.synthesize(delay_problem)
    assert result.order == 5
    assert result.diagnostics["stability"].ms_stable
    assert any("J_opt" in message for message in caplog.messages)


def test_synthesize_infeasible(engine, erasure_problem):
    problem = replace(erasure_problem, noise_setting={"e": 0.7})
    with pytest.raises(InfeasibleError, match="not mean-square stabilizable"):
        engine.synthesize(problem)


def test_synthesize_rejects_violated_assumptions(engine, delay_problem):
    plant: Plant = delay_problem.plant
    broken = replace(
        delay_problem,
        plant=Plant(A=plant.A, B1=plant.B1, B2=np.zeros((3, 1)), C1=plant.C1, C2=plant.C2, D=plant.D),
    )
    with pytest.raises(StructuralError):
        engine.synthesize(broken)


def test_analyze_and_simulate(engine, erasure_problem):
    result = engine.synthesize(erasure_problem)
    report = engine.analyze(erasure_problem, result.K)
    assert report.ms_stable
    assert report.J_H2 == pytest.approx(result.J_opt, rel=1e-6)

    sim = engine.simulate(erasure_problem, result.K, SimConfig(runs=200, horizon=500, seed=1, burn_in=100))
    assert sim.runs == 200
    assert sim.valid


def test_sweep_worked_example_is_stabilizable_everywhere(engine, delay_problem):
    rows = engine.sweep(delay_problem, simulate=False)
    assert [row.param for row in rows] == pytest.approx([0.1 * i for i in range(10)])
    for row in rows:
        assert row.status == "Feasible", row.error
        assert row.ms_stable
        assert row.J_theory == pytest.approx(row.J_opt, rel=1e-6)


def test_sweep_needs_a_grid(engine, delay_problem):
    with pytest.raises(ValidationError):
        engine.sweep(replace(delay_problem, sweep=None))
