"""
Command-line surface: msh2 validate|synthesize|analyze|simulate|sweep.

Exit codes are 0 on success, 1 on numeric failure or violated assumptions,
2 on input errors and 3 when the problem is not mean-square stabilizable.
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..base import InfeasibleError, Msh2Error, ValidationError
from ..engine import SynthesisEngine
from ..problem import ProblemFile, controller_to_dict, load_controller, load_problem, save_controller
from ..sim import SimConfig, SimResult, SweepRow, Trace
from ..analysis import StabilityReport
from ..synthesis import SynthesisResult
from ..model import AssumptionReport
from .display import NAME_DISPLAY_MAP


EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

CSV_COLUMNS: List[str] = ["param", "J_theory", "J_sim", "ci", "ms_stable", "rho_ghat", "margin"]


def format_number(value: Optional[float]) -> str:
    """Twelve significant digits"""
    if value is None:
        return "nan"
    return format(float(value), ".12g")


def format_csv(rows: Sequence[SweepRow]) -> str:
    """CSV text with a fixed header"""
    lines: List[str] = [",".join(CSV_COLUMNS)]
    for row in rows:
        cells: List[str] = []
        for name in CSV_COLUMNS:
            value = getattr(row, name)
            if isinstance(value, (bool, np.bool_)):
                cells.append("1" if value else "0")
            else:
                cells.append(format_number(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit(text: str, out: Optional[str]) -> None:
    """Write to a file or to stdout"""
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sim_config(problem: ProblemFile, args: argparse.Namespace) -> SimConfig:
    config: SimConfig = problem.sim or SimConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _report_row(report: StabilityReport, param: float = np.nan) -> SweepRow:
    return SweepRow(
        param=param,
        J_theory=report.J_H2 if report.J_H2 is not None else np.inf,
        ms_stable=report.ms_stable,
        rho_ghat=report.rho,
        margin=report.margin,
    )


def cmd_validate(engine: SynthesisEngine, args: argparse.Namespace) -> int:
    """Check the standing assumptions"""
    problem: ProblemFile = load_problem(args.problem)
    report: AssumptionReport = engine.validate(problem)

    if args.json:
        data: dict = {
            "problem": problem.name,
            "mode": report.mode.value,
            "passed": bool(report.passed),
            "checks": {k: bool(v) for k, v in report.checks().items()},
            "r1": report.r1,
            "r2": report.r2,
            "margins": {k: float(v) for k, v in report.margins.items()},
            "ambiguous": report.ambiguous,
            "channel": engine.channel_for(problem).get_data(),
        }
        emit(json.dumps(data, indent=2) + "\n", args.out)
    else:
        lines: List[str] = [f"{problem.name} ({report.mode.value} feedback)"]
        for name, ok in report.checks().items():
            flag: str = "ok" if ok else "FAILED"
            lines.append(f"  {NAME_DISPLAY_MAP.get(name, name):<52} {flag}")
        lines.append(f"  {NAME_DISPLAY_MAP['r1']:<52} {report.r1}")
        lines.append(f"  {NAME_DISPLAY_MAP['r2']:<52} {report.r2}")
        for name in report.ambiguous:
            lines.append(f"  warning: {name} is within the rank tolerance band")
        emit("\n".join(lines) + "\n", args.out)

    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_synthesize(engine: SynthesisEngine, args: argparse.Namespace) -> int:
    """Design the optimal controller"""
    problem: ProblemFile = load_problem(args.problem)
    result: SynthesisResult = engine.synthesize(problem)
    report: StabilityReport = result.diagnostics["stability"]

    if args.out:
        save_controller(result, args.out)

    if args.json:
        data: dict = controller_to_dict(result)
        data.update({"J_H2": report.J_H2, "margin": report.margin, "rho_ghat": report.rho})
        data["channel"] = engine.channel_for(problem).get_data()
        sys.stdout.write(json.dumps(data, indent=2, default=float) + "\n")
    else:
        values: dict = {
            "status": result.status.value,
            "order": result.order,
            "J_opt": format_number(result.J_opt),
            "J_H2": format_number(report.J_H2),
            "margin": format_number(report.margin),
            "iterations": result.mare.iterations,
            "residual": f"{result.mare.residual:.3e}",
        }
        lines: List[str] = [f"{NAME_DISPLAY_MAP[k]:<24} {v}" for k, v in values.items()]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_analyze(engine: SynthesisEngine, args: argparse.Namespace) -> int:
    """Mean-square verdict of a stored controller"""
    problem: ProblemFile = load_problem(args.problem)
    report: StabilityReport = engine.analyze(problem, load_controller(args.controller))
    row: SweepRow = _report_row(report)

    if args.json:
        data: dict = {name: getattr(row, name) for name in CSV_COLUMNS}
        data.update({"verdict": report.verdict.value, "norms": report.norms})
        emit(json.dumps(data, indent=2, default=float) + "\n", args.out)
    else:
        emit(format_csv([row]), args.out)
    return EXIT_OK if report.ms_stable else EXIT_INFEASIBLE


def cmd_simulate(engine: SynthesisEngine, args: argparse.Namespace) -> int:
    """Monte-Carlo check of a stored controller"""
    problem: ProblemFile = load_problem(args.problem)
    controller = load_controller(args.controller)
    config: SimConfig = _sim_config(problem, args)

    report: StabilityReport = engine.analyze(problem, controller)
    result: SimResult = engine.simulate(problem, controller, config, args.threads)

    row: SweepRow = _report_row(report)
    row.J_sim = result.mean_power_z
    row.ci = result.ci_halfwidth

    if args.trace:
        trace: Trace = engine.trace(problem, controller, config)
        write_trace(trace, args.trace)

    if args.json:
        data: dict = {name: getattr(row, name) for name in CSV_COLUMNS}
        data.update({"J_u": result.mean_power_u, "diverged": result.diverged, "runs": result.runs})
        emit(json.dumps(data, indent=2, default=float) + "\n", args.out)
    else:
        emit(format_csv([row]), args.out)
    return EXIT_OK if result.valid else EXIT_NUMERIC


def cmd_sweep(engine: SynthesisEngine, args: argparse.Namespace) -> int:
    """Design, analyze and simulate over the declared grid"""
    problem: ProblemFile = load_problem(args.problem)
    config: SimConfig = _sim_config(problem, args)
    rows: List[SweepRow] = engine.sweep(problem, args.threads, simulate=not args.no_sim, config=config)

    if args.json:
        data: list = [asdict(row) for row in rows]
        emit(json.dumps(data, indent=2, default=float) + "\n", args.out)
    else:
        emit(format_csv(rows), args.out)

    if any(row.error for row in rows):
        return EXIT_NUMERIC
    return EXIT_OK


def write_trace(trace: Trace, path: str) -> None:
    """One row per sample: x, x_K, u, u_d, z"""
    blocks: List[np.ndarray] = [
        trace.x,
        trace.x_K,
        trace.u[:, None],
        trace.u_d[:, None],
        trace.z,
    ]
    header: List[str] = (
        [f"x{i}" for i in range(trace.x.shape[1])]
        + [f"xK{i}" for i in range(trace.x_K.shape[1])]
        + ["u", "u_d"]
        + [f"z{i}" for i in range(trace.z.shape[1])]
    )
    np.savetxt(path, np.hstack(blocks), fmt="%.12g", delimiter=",", header=",".join(header), comments="")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of all commands"""
    parser = argparse.ArgumentParser(
        prog="msh2",
        description="Mean-square H2 optimal control over channels with FIR multiplicative noise.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress at INFO level")
    parser.add_argument(
        "--method",
        choices=["bracket", "iteration"],
        default="bracket",
        help="modified Riccati solver",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem file (JSON)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="output file instead of stdout")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--seed", type=int, help="override the seed of the sim block")
    runs.add_argument("--threads", type=int, default=1, help="worker threads for Monte-Carlo runs")

    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", parents=[common], help="check the standing assumptions")
    validate.set_defaults(func=cmd_validate)

    synthesize = commands.add_parser("synthesize", parents=[common], help="design the optimal controller")
    synthesize.set_defaults(func=cmd_synthesize)

    analyze = commands.add_parser("analyze", parents=[common], help="mean-square analysis of a controller")
    analyze.add_argument("controller", help="controller file written by synthesize --out")
    analyze.set_defaults(func=cmd_analyze)

    simulate = commands.add_parser("simulate", parents=[common, runs], help="Monte-Carlo simulation")
    simulate.add_argument("controller", help="controller file written by synthesize --out")
    simulate.add_argument("--trace", help="write the trajectories of run 0 to this CSV file")
    simulate.set_defaults(func=cmd_simulate)

    sweep = commands.add_parser("sweep", parents=[common, runs], help="sweep the declared parameter")
    sweep.add_argument("--no-sim", action="store_true", help="skip the Monte-Carlo runs")
    sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Sequence[str] = None) -> int:
    """Entry point"""
    parser: argparse.ArgumentParser = build_parser()
    args: argparse.Namespace = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s  %(levelname)s  %(name)s  %(message)s",
    )

    engine: SynthesisEngine = SynthesisEngine(method=args.method)
    engine.init_engine()

    command: Callable[[SynthesisEngine, argparse.Namespace], int] = args.func
    try:
        return command(engine, args)
    except ValidationError as ex:
        location: str = f" ({ex.field})" if ex.field else ""
        sys.stderr.write(f"input error{location}: {ex}\n")
        return EXIT_INPUT
    except InfeasibleError as ex:
        sys.stderr.write(f"{ex}\n")
        return EXIT_INFEASIBLE
    except Msh2Error as ex:
        sys.stderr.write(f"{type(ex).__name__}: {ex}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
