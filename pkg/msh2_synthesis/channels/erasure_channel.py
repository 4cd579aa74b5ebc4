import numpy as np

from ..model import NoiseModel, erasure_channel_noise
from ..template import ChannelTemplate


class ErasureChannel(ChannelTemplate):
    """Analog erasure channel"""

    display_name: str = "Analog erasure"

    default_setting: dict = {"e": 0.1}

    def __init__(self, engine, channel_name: str, setting: dict) -> None:
        """Constructor"""
        super().__init__(engine, channel_name, setting)

        self.e: float = float(self.setting["e"])

    def build_noise(self) -> NoiseModel:
        return erasure_channel_noise(self.e)

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Bernoulli(1 - e) gains"""
        delivered: np.ndarray = rng.random(horizon) < 1 - self.e
        return delivered.astype(float).reshape(horizon, 1)
