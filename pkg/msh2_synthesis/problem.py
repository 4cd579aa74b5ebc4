"""
JSON problem files and controller files.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import control

from .base import FeedbackMode, ValidationError
from .model import Plant, as_matrix
from .sim import SimConfig


CHANNEL_TYPES: Dict[str, str] = {
    "delay": "DelayChannel",
    "erasure": "ErasureChannel",
    "custom": "CustomChannel",
}

NOISE_FIELDS: Dict[str, List[str]] = {
    "delay": ["alpha", "p"],
    "erasure": ["e"],
    "custom": ["mu", "beta"],
}


@dataclass
class SweepSpec:
    """Scalar parameter swept over a grid"""

    parameter: str
    grid: List[float]
    affine: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)

    def setting_at(self, value: float) -> dict:
        """Channel setting overrides at one grid value"""
        if self.parameter in self.affine:
            line: Dict[str, List[float]] = self.affine[self.parameter]
            base: np.ndarray = np.asarray(line["base"], dtype=float)
            slope: np.ndarray = np.asarray(line["slope"], dtype=float)
            return {self.parameter: (base + value * slope).tolist()}
        return {self.parameter: float(value)}


@dataclass
class ProblemFile:
    """Plant, channel and experiment settings of one study"""

    name: str
    plant: Plant
    noise_type: str
    noise_setting: dict
    feedback: FeedbackMode = FeedbackMode.OUTPUT
    sim: Optional[SimConfig] = None
    sweep: Optional[SweepSpec] = None

    @property
    def template_name(self) -> str:
        return CHANNEL_TYPES[self.noise_type]


def _require(block: dict, name: str, context: str) -> Any:
    """Fetch a mandatory field"""
    if not isinstance(block, dict):
        raise ValidationError(f"{context} must be an object", field=context)
    if name not in block:
        raise ValidationError(f"{context} is missing field {name}", field=f"{context}.{name}")
    return block[name]


def _dimension(block: dict, name: str) -> int:
    value: Any = _require(block, name, "plant")
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValidationError(f"plant.{name} must be a positive integer", field=f"plant.{name}")
    return value


def parse_plant(block: dict) -> Plant:
    """Plant from its JSON block, dimensions checked before any math"""
    n: int = _dimension(block, "n")
    p: int = _dimension(block, "p")
    q: int = _dimension(block, "q")

    shapes: Dict[str, Tuple[int, int]] = {
        "A": (n, n),
        "B1": (n, 1),
        "B2": (n, 1),
        "C1": (p, n),
        "C2": (q, n),
        "D": (p, 1),
    }
    matrices: Dict[str, np.ndarray] = {
        name: as_matrix(_require(block, name, "plant"), rows, cols, f"plant.{name}")
        for name, (rows, cols) in shapes.items()
    }
    return Plant(**matrices)


def _vector(value: Any, field: str) -> List[float]:
    """Nonempty finite float vector"""
    try:
        vec: np.ndarray = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError):
        raise ValidationError(f"{field} is not numeric", field=field)
    if vec.ndim != 1 or vec.size == 0:
        raise ValidationError(f"{field} must be a nonempty list of numbers", field=field)
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{field} contains non-finite entries", field=field)
    return vec.tolist()


def parse_noise(noise_type: str, block: dict) -> dict:
    """Numeric channel setting, coerced before any moment is computed"""
    fields: dict = {key: _require(block, key, "noise") for key in NOISE_FIELDS[noise_type]}

    if noise_type == "erasure":
        if np.ndim(fields["e"]) != 0:
            raise ValidationError("noise.e must be a number", field="noise.e")
        return {"e": _vector(fields["e"], "noise.e")[0]}

    if noise_type == "custom":
        mu: List[float] = _vector(fields["mu"], "noise.mu")
        beta: np.ndarray = as_matrix(fields["beta"], len(mu), len(mu), "noise.beta")
        return {"mu": mu, "beta": beta.tolist()}

    setting: dict = {key: _vector(value, f"noise.{key}") for key, value in fields.items()}
    if len(setting["alpha"]) != len(setting["p"]):
        raise ValidationError("noise.alpha and noise.p differ in length", field="noise.p")
    return setting


def parse_problem(data: dict, name: str = "problem") -> ProblemFile:
    """Problem from decoded JSON"""
    plant: Plant = parse_plant(_require(data, "plant", "problem"))

    noise: dict = _require(data, "noise", "problem")
    noise_type: str = _require(noise, "type", "noise")
    if noise_type not in CHANNEL_TYPES:
        raise ValidationError(
            f"noise.type must be one of {sorted(CHANNEL_TYPES)}, got {noise_type!r}", field="noise.type"
        )
    setting: dict = parse_noise(noise_type, noise)

    feedback_text: str = data.get("feedback", FeedbackMode.OUTPUT.value)
    try:
        feedback: FeedbackMode = FeedbackMode(feedback_text)
    except ValueError:
        raise ValidationError(f"unknown feedback mode {feedback_text!r}", field="feedback")

    sim: Optional[SimConfig] = None
    if "sim" in data:
        block: dict = data["sim"]
        if not isinstance(block, dict):
            raise ValidationError("sim must be an object", field="sim")
        try:
            sim = SimConfig(**{k: int(v) for k, v in block.items()})
        except (TypeError, ValueError) as ex:
            raise ValidationError(f"invalid sim block: {ex}", field="sim")

    sweep: Optional[SweepSpec] = None
    if "sweep" in data:
        block = data["sweep"]
        grid: List[float] = _vector(_require(block, "grid", "sweep"), "sweep.grid")
        sweep = SweepSpec(
            parameter=_require(block, "parameter", "sweep"),
            grid=grid,
            affine=block.get("affine", {}),
        )

    return ProblemFile(
        name=data.get("name", name),
        plant=plant,
        noise_type=noise_type,
        noise_setting=setting,
        feedback=feedback,
        sim=sim,
        sweep=sweep,
    )


def load_problem(path: Union[str, Path]) -> ProblemFile:
    """Read and validate a problem file"""
    path = Path(path)
    try:
        data: dict = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"problem file not found: {path}", field="path")
    except json.JSONDecodeError as ex:
        raise ValidationError(f"{path} is not valid JSON: {ex}", field="path")
    return parse_problem(data, path.stem)


def _listify(value) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def controller_to_dict(result) -> dict:
    """Serializable view of a synthesis result"""
    K: control.StateSpace = result.K
    return {
        "order": result.order,
        "mode": result.mode.value,
        "A_K": _listify(np.asarray(K.A)),
        "B_K": _listify(np.asarray(K.B)),
        "C_K": _listify(np.asarray(K.C)),
        "D_K": _listify(np.asarray(K.D)),
        "F": _listify(result.F),
        "L": _listify(result.L),
        "L0": _listify(result.L0),
        "X": _listify(result.X),
        "J_opt": result.J_opt,
    }


def save_controller(result, path: Union[str, Path]) -> None:
    """Write a controller file"""
    Path(path).write_text(json.dumps(controller_to_dict(result), indent=2), encoding="utf-8")


def load_controller(path: Union[str, Path]) -> control.StateSpace:
    """Controller state-space from a controller file"""
    path = Path(path)
    try:
        data: dict = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"controller file not found: {path}", field="controller")
    except json.JSONDecodeError as ex:
        raise ValidationError(f"{path} is not valid JSON: {ex}", field="controller")

    order: int = int(_require(data, "order", "controller"))
    D_K: np.ndarray = np.atleast_2d(np.asarray(_require(data, "D_K", "controller"), dtype=float))
    q: int = D_K.shape[1]
    try:
        A_K: np.ndarray = np.asarray(data.get("A_K", []), dtype=float).reshape(order, order)
        B_K: np.ndarray = np.asarray(data.get("B_K", []), dtype=float).reshape(order, q)
        C_K: np.ndarray = np.asarray(data.get("C_K", []), dtype=float).reshape(1, order)
    except ValueError as ex:
        raise ValidationError(f"controller matrices do not match order {order}: {ex}", field="controller")
    return control.ss(A_K, B_K, C_K, D_K, True)
