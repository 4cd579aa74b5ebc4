import logging
from typing import Dict, List, Optional, Tuple, Type, Union

import control

from .base import APP_NAME, InfeasibleError, StructuralError, ValidationError
from .template import ChannelTemplate
from .problem import ProblemFile
from .model import AssumptionReport, NoiseModel, validate_assumptions
from .spectrum import SpectralModel, build_spectral_model
from .synthesis import SynthesisResult, design_controller
from .analysis import StabilityReport, analyze, scaling_certificate
from .sim import (
    SimConfig,
    SimResult,
    SweepRow,
    Trace,
    simulate_closed_loop,
    sweep,
    trace_run,
)


class SynthesisEngine:
    """Synthesis engine"""

    def __init__(self, method: str = "bracket") -> None:
        """Constructor"""
        self.engine_name: str = APP_NAME
        self.logger: logging.Logger = logging.getLogger(APP_NAME)
        self.method: str = method

        self.channel_templates: Dict[str, Type[ChannelTemplate]] = {}
        self.channels: Dict[str, ChannelTemplate] = {}
        self.problem_channels: Dict[str, str] = {}  # problem name -> channel name

        self.load_channel_template()

    def init_engine(self) -> None:
        """Initializing the engine"""
        self.write_log("Synthesis engine started")

    def load_channel_template(self) -> None:
        """Load channel classes"""
        from .channels.delay_channel import DelayChannel
        from .channels.erasure_channel import ErasureChannel
        from .channels.custom_channel import CustomChannel

        self.add_channel_template(DelayChannel)
        self.add_channel_template(ErasureChannel)
        self.add_channel_template(CustomChannel)

    def add_channel_template(self, template: Type[ChannelTemplate]) -> None:
        """Add channel class"""
        self.channel_templates[template.__name__] = template

    def get_channel_template(self) -> dict:
        """Get channel classes"""
        return self.channel_templates

    def create_channel(self, template_name: str, setting: dict) -> ChannelTemplate:
        """Create a named channel instance"""
        channel_template: Optional[Type[ChannelTemplate]] = self.channel_templates.get(template_name, None)
        if not channel_template:
            raise ValidationError(f"unknown channel template {template_name}", field="noise.type")

        channel_template._count += 1
        channel_name: str = f"{channel_template.__name__}_{channel_template._count}"
        channel: ChannelTemplate = channel_template(self, channel_name, setting)

        self.channels[channel_name] = channel
        return channel

    def channel_for(self, problem: ProblemFile) -> ChannelTemplate:
        """Channel described by a problem file, reused across pipeline calls"""
        channel_name: Optional[str] = self.problem_channels.get(problem.name)
        channel: Optional[ChannelTemplate] = self.channels.get(channel_name)
        if (
            channel
            and type(channel).__name__ == problem.template_name
            and channel.setting == {**channel.default_setting, **problem.noise_setting}
        ):
            return channel

        if channel_name:
            self.channels.pop(channel_name, None)
        channel = self.create_channel(problem.template_name, problem.noise_setting)
        self.problem_channels[problem.name] = channel.channel_name
        return channel

    def validate(self, problem: ProblemFile) -> AssumptionReport:
        """Check the standing assumptions"""
        noise: NoiseModel = self.channel_for(problem).noise_model()
        report: AssumptionReport = validate_assumptions(problem.plant, noise.mu, problem.feedback)

        if report.passed:
            self.write_log(f"{problem.name}: all assumptions hold")
        else:
            self.write_log(f"{problem.name}: failed {', '.join(report.failures())}")
        return report

    def synthesize(self, problem: ProblemFile, check: bool = True) -> SynthesisResult:
        """Optimal controller, verified by the mean-square analysis"""
        if check:
            report: AssumptionReport = self.validate(problem)
            if not report.passed:
                raise StructuralError(f"assumptions violated: {', '.join(report.failures())}")

        channel: ChannelTemplate = self.channel_for(problem)
        result: SynthesisResult = design_controller(
            problem.plant, channel.noise_model(), problem.feedback, self.method
        )
        self.write_log(
            f"MARE {result.mare.method} finished after {result.mare.iterations} steps, "
            f"residual {result.mare.residual:.3e}",
            channel,
        )

        if not result.feasible:
            self.write_log("not mean-square stabilizable", channel)
            raise InfeasibleError(f"{problem.name}: not mean-square stabilizable")

        stability: StabilityReport = analyze(problem.plant, result.spectral, result.K)
        result.diagnostics["stability"] = stability
        if not stability.ms_stable:
            self.write_log(f"closed loop fails the mean-square test, margin {stability.margin:.3e}", channel)
            raise InfeasibleError(f"{problem.name}: synthesized loop is not mean-square stable")

        self.write_log(
            f"controller of order {result.order}, J_opt {result.J_opt:.8g}, J_H2 {stability.J_H2:.8g}",
            channel,
        )
        return result

    def analyze(self, problem: ProblemFile, controller: control.StateSpace) -> StabilityReport:
        """Mean-square verdict of a given controller"""
        channel: ChannelTemplate = self.channel_for(problem)
        spectral: SpectralModel = build_spectral_model(channel.noise_model())
        report: StabilityReport = analyze(problem.plant, spectral, controller)

        gamma_sq: Optional[float] = scaling_certificate(report.g_hat)
        if gamma_sq is not None:
            self.write_log(f"scaling certificate gamma^2 = {gamma_sq:.6g}", channel)
        self.write_log(f"margin {report.margin:.6g}, rho(G) {report.rho:.6g}", channel)
        return report

    def simulate(
        self,
        problem: ProblemFile,
        controller: control.StateSpace,
        config: SimConfig = None,
        threads: int = 1,
    ) -> SimResult:
        """Monte-Carlo power estimate"""
        config = config or problem.sim or SimConfig()
        channel: ChannelTemplate = self.channel_for(problem)
        self.write_log(f"simulating {config.runs} runs of {config.horizon} samples, seed {config.seed}", channel)

        result: SimResult = simulate_closed_loop(problem.plant, controller, channel, config, threads)
        self.write_log(
            f"power of z {result.mean_power_z:.8g} +- {result.ci_halfwidth:.3g}, {result.diverged} diverged",
            channel,
        )
        return result

    def trace(
        self,
        problem: ProblemFile,
        controller: control.StateSpace,
        config: SimConfig = None,
        run: int = 0,
    ) -> Trace:
        """Trajectories of one run"""
        config = config or problem.sim or SimConfig()
        return trace_run(problem.plant, controller, self.channel_for(problem), config, run)

    def sweep(
        self,
        problem: ProblemFile,
        threads: int = 1,
        simulate: bool = True,
        config: SimConfig = None,
    ) -> List[SweepRow]:
        """Rows of the parameter sweep declared in the problem"""
        if not problem.sweep:
            raise ValidationError(f"{problem.name} declares no sweep", field="sweep")

        base: ChannelTemplate = self.channel_for(problem)
        grid: List[Tuple[float, ChannelTemplate]] = [
            (value, base.with_setting(problem.sweep.setting_at(value)))
            for value in problem.sweep.grid
        ]

        config = config or problem.sim or SimConfig()
        self.write_log(f"sweeping {problem.sweep.parameter} over {len(grid)} points", base)
        return sweep(
            problem.plant,
            grid,
            config if simulate else None,
            problem.feedback,
            self.method,
            threads,
            log=lambda msg: self.write_log(msg, base),
        )

    def write_log(self, msg: str, source: Union[ChannelTemplate, str] = None) -> None:
        """Output log"""
        if source:
            name: str = source.channel_name if isinstance(source, ChannelTemplate) else str(source)
            msg = f"{name}：{msg}"

        self.logger.info(msg)
