import logging
from typing import Optional, TYPE_CHECKING

import numpy as np

from .base import APP_NAME
from .model import NoiseModel

if TYPE_CHECKING:
    from .engine import SynthesisEngine


class ChannelTemplate:
    """Channel template"""

    _count: int = 0  # instance count

    display_name: str = ""  # display name
    default_setting: dict = {}  # default parameters

    def __init__(
        self,
        engine: Optional["SynthesisEngine"],
        channel_name: str,
        setting: dict,
    ) -> None:
        """Constructor"""
        self.engine: Optional["SynthesisEngine"] = engine
        self.channel_name: str = channel_name
        self.setting: dict = {**self.default_setting, **setting}

        self._noise: Optional[NoiseModel] = None

    def build_noise(self) -> NoiseModel:
        """Moments of the channel gains"""
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Realized gains, one row per source instant"""
        raise NotImplementedError

    def noise_model(self) -> NoiseModel:
        """Cached noise model"""
        if self._noise is None:
            self._noise = self.build_noise()
            self.write_log(
                f"noise model ready, horizon {self._noise.horizon}, mean {np.round(self._noise.mu, 6).tolist()}"
            )
        return self._noise

    @property
    def horizon(self) -> int:
        return self.noise_model().horizon

    @property
    def mean_gain(self) -> float:
        return float(np.sum(self.noise_model().mu))

    def sample_packets(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Entry [l, i] is the gain applied at l + i to the control sent at l"""
        return self.draw(rng, horizon)

    def with_setting(self, overrides: dict) -> "ChannelTemplate":
        """Unregistered channel of the same kind with an updated setting"""
        setting: dict = {**self.setting, **overrides}
        suffix: str = ",".join(f"{k}={v}" for k, v in overrides.items())
        return type(self)(self.engine, f"{self.channel_name}[{suffix}]", setting)

    def get_parameters(self) -> dict:
        """Channel parameters as given in the problem file"""
        return {name: self.setting[name] for name in self.default_setting}

    def get_moments(self) -> dict:
        """First and second moments of the FIR gains"""
        noise: NoiseModel = self.noise_model()
        return {
            "horizon": noise.horizon,
            "mean_gain": self.mean_gain,
            "mu": noise.mu.tolist(),
            "beta": noise.beta.tolist(),
        }

    def get_data(self) -> dict:
        """Channel summary for reports"""
        return {
            "channel_name": self.channel_name,
            "display_name": self.display_name,
            "parameters": self.get_parameters(),
            "moments": self.get_moments(),
        }

    def write_log(self, msg: str) -> None:
        """Output logs"""
        if self.engine:
            self.engine.write_log(msg, self)
        else:
            logging.getLogger(APP_NAME).info(f"{self.channel_name}：{msg}")
