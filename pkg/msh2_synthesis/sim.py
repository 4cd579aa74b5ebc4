"""
Monte-Carlo simulation of the stochastic closed loop.

Every run owns a counter-based random stream keyed by (seed, run), so the
result does not depend on how runs are grouped into blocks or threads.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .base import (
    HORIZON,
    BURN_IN,
    BLOCK_SIZE,
    DIVERGENCE_GUARD,
    FeedbackMode,
    Msh2Error,
    ValidationError,
)
from .model import Plant
from .template import ChannelTemplate
from .synthesis import SynthesisResult, design_controller
from .analysis import StabilityReport, analyze


logger = logging.getLogger(__name__)


@dataclass
class SimConfig:
    """Monte-Carlo settings"""

    runs: int = 1000
    horizon: int = HORIZON
    seed: int = 0
    burn_in: int = BURN_IN

    def __post_init__(self) -> None:
        """Constructor"""
        if self.runs < 1:
            raise ValidationError("at least one run is required", field="runs")
        if not 0 <= self.burn_in < self.horizon:
            raise ValidationError(
                f"burn_in {self.burn_in} must lie in [0, horizon={self.horizon})", field="burn_in"
            )
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative", field="seed")


@dataclass
class SimResult:
    """Averaged powers over the converged runs"""

    mean_power_z: float
    mean_power_u: float
    ci_halfwidth: float
    diverged: int
    runs: int
    per_run_powers: Optional[np.ndarray] = None

    @property
    def valid(self) -> bool:
        return self.diverged == 0


@dataclass
class Trace:
    """Trajectories of a single run"""

    x: np.ndarray
    x_K: np.ndarray
    u: np.ndarray
    u_d: np.ndarray
    z: np.ndarray


@dataclass
class SweepRow:
    """One grid point of a parameter sweep"""

    param: float
    J_theory: float = np.nan
    J_sim: float = np.nan
    ci: float = np.nan
    ms_stable: bool = False
    rho_ghat: float = np.nan
    margin: float = np.nan
    J_opt: float = np.nan
    status: str = ""
    error: str = ""


def run_generator(seed: int, run: int) -> np.random.Generator:
    """Independent stream of one Monte-Carlo run"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run])))


def sample_channel_path(channel: ChannelTemplate, horizon: int, seed: int, run: int = 0) -> np.ndarray:
    """Realized channel gains of one run, entry [l, i] = omega(l + i, l)"""
    return channel.sample_packets(run_generator(seed, run), horizon)


def _draw_run(channel: ChannelTemplate, horizon: int, seed: int, run: int) -> Tuple[np.ndarray, np.ndarray]:
    """Channel gains and disturbance of one run"""
    rng: np.random.Generator = run_generator(seed, run)
    packets: np.ndarray = channel.sample_packets(rng, horizon)
    w: np.ndarray = rng.standard_normal(horizon)
    return packets, w


def _rollout(
    plant: Plant,
    K,
    packets: np.ndarray,
    w: np.ndarray,
    burn_in: int,
    record: bool = False,
) -> dict:
    """Simulate a batch of runs side by side"""
    runs, horizon, lags = packets.shape
    A_K, B_K, C_K, D_K = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (K.A, K.B, K.C, K.D))
    order: int = K.nstates
    if not order:
        A_K = np.zeros((0, 0))
        B_K = np.zeros((0, plant.q))
        C_K = np.zeros((1, 0))

    x: np.ndarray = np.zeros((runs, plant.n))
    xk: np.ndarray = np.zeros((runs, order))
    u: np.ndarray = np.zeros((runs, horizon))
    power_z: np.ndarray = np.zeros(runs)
    power_u: np.ndarray = np.zeros(runs)
    diverged: np.ndarray = np.zeros(runs, dtype=bool)

    history: Dict[str, List[np.ndarray]] = {"x": [], "x_K": [], "u_d": [], "z": []}

    for k in range(horizon):
        y: np.ndarray = x @ plant.C2.T
        u[:, k] = (y @ D_K.T + xk @ C_K.T)[:, 0]

        u_d: np.ndarray = np.zeros(runs)
        for i in range(min(lags, k + 1)):
            u_d += packets[:, k - i, i] * u[:, k - i]

        z: np.ndarray = x @ plant.C1.T + u_d[:, None] * plant.D.T

        if record:
            history["x"].append(x.copy())
            history["x_K"].append(xk.copy())
            history["u_d"].append(u_d.copy())
            history["z"].append(z.copy())

        if k >= burn_in:
            power_z += np.sum(z ** 2, axis=1)
            power_u += u[:, k] ** 2

        xk = xk @ A_K.T + y @ B_K.T
        x = x @ plant.A.T + w[:, k, None] * plant.B1.T + u_d[:, None] * plant.B2.T

        blown: np.ndarray = (np.max(np.abs(x), axis=1, initial=0.0) > DIVERGENCE_GUARD) | (
            np.max(np.abs(xk), axis=1, initial=0.0) > DIVERGENCE_GUARD
        )
        if np.any(blown):
            diverged |= blown
            x[blown] = 0
            xk[blown] = 0
            u[blown] = 0

    samples: int = horizon - burn_in
    result: dict = {
        "power_z": power_z / samples,
        "power_u": power_u / samples,
        "diverged": diverged,
    }
    if record:
        result.update({name: np.stack(values, axis=1) for name, values in history.items()})
        result["u"] = u
    return result


def _simulate_block(
    plant: Plant, K, channel: ChannelTemplate, config: SimConfig, start: int, stop: int
) -> dict:
    """Runs [start, stop) of the experiment"""
    draws = [_draw_run(channel, config.horizon, config.seed, run) for run in range(start, stop)]
    packets: np.ndarray = np.stack([d[0] for d in draws])
    w: np.ndarray = np.stack([d[1] for d in draws])
    return _rollout(plant, K, packets, w, config.burn_in)


def simulate_closed_loop(
    plant: Plant,
    K,
    channel: ChannelTemplate,
    config: SimConfig,
    threads: int = 1,
) -> SimResult:
    """Average powers of z and u over independent seeded runs"""
    if np.atleast_2d(K.D).shape[1] != plant.q:
        raise ValidationError("controller input does not match the measurement size", field="K")

    bounds: List[Tuple[int, int]] = [
        (start, min(start + BLOCK_SIZE, config.runs)) for start in range(0, config.runs, BLOCK_SIZE)
    ]
    blocks: List[dict] = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_simulate_block)(plant, K, channel, config, start, stop) for start, stop in bounds
    )

    power_z: np.ndarray = np.concatenate([b["power_z"] for b in blocks])
    power_u: np.ndarray = np.concatenate([b["power_u"] for b in blocks])
    diverged: np.ndarray = np.concatenate([b["diverged"] for b in blocks])

    kept_z: np.ndarray = power_z[~diverged]
    kept_u: np.ndarray = power_u[~diverged]
    count: int = kept_z.size

    if count:
        mean_z: float = float(np.sum(kept_z) / count)
        mean_u: float = float(np.sum(kept_u) / count)
    else:
        mean_z = mean_u = np.inf
    ci: float = float(1.96 * np.std(kept_z, ddof=1) / np.sqrt(count)) if count > 1 else 0.0

    if diverged.any():
        logger.warning("%d of %d runs diverged", int(diverged.sum()), config.runs)

    return SimResult(
        mean_power_z=mean_z,
        mean_power_u=mean_u,
        ci_halfwidth=ci,
        diverged=int(diverged.sum()),
        runs=config.runs,
        per_run_powers=power_z,
    )


def trace_run(plant: Plant, K, channel: ChannelTemplate, config: SimConfig, run: int = 0) -> Trace:
    """Full trajectories of one run"""
    packets, w = _draw_run(channel, config.horizon, config.seed, run)
    result: dict = _rollout(plant, K, packets[None], w[None], config.burn_in, record=True)
    return Trace(
        x=result["x"][0],
        x_K=result["x_K"][0],
        u=result["u"][0],
        u_d=result["u_d"][0],
        z=result["z"][0],
    )


def sweep(
    plant: Plant,
    grid: Sequence[Tuple[float, ChannelTemplate]],
    config: Optional[SimConfig],
    mode: FeedbackMode = FeedbackMode.OUTPUT,
    method: str = "bracket",
    threads: int = 1,
    log: Callable[[str], None] = None,
) -> List[SweepRow]:
    """Design, analyze and simulate at every grid point"""
    if not grid:
        raise ValidationError("sweep grid is empty", field="grid")
    log = log or logger.info

    rows: List[SweepRow] = []
    for param, channel in grid:
        row: SweepRow = SweepRow(param=float(param))
        rows.append(row)

        try:
            result: SynthesisResult = design_controller(plant, channel.noise_model(), mode, method)
            row.status = result.status.value
            if not result.feasible:
                log(f"{param:.6g}: not mean-square stabilizable")
                continue

            row.J_opt = result.J_opt
            report: StabilityReport = analyze(plant, result.spectral, result.K)
            row.ms_stable = report.ms_stable
            row.rho_ghat = report.rho
            row.margin = report.margin
            row.J_theory = report.J_H2 if report.J_H2 is not None else np.inf

            if config is not None and report.ms_stable:
                sim: SimResult = simulate_closed_loop(plant, result.K, channel, config, threads)
                row.J_sim = sim.mean_power_z
                row.ci = sim.ci_halfwidth
            log(f"{param:.6g}: J_theory {row.J_theory:.6g}, J_sim {row.J_sim:.6g}")
        except Msh2Error as ex:
            row.status = "Failed"
            row.error = str(ex)
            log(f"{param:.6g}: {ex}")

    return rows
