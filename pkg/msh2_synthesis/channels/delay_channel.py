
import numpy as np

from ..model import NoiseModel, delay_channel_noise
from ..template import ChannelTemplate


class DelayChannel(ChannelTemplate):
    """Random-delay channel with time-stamped weighting"""

    display_name: str = "Random delay"

    default_setting: dict = {"alpha": [1.0, 0.67, 0.0], "p": [0.6, 0.3, 0.1]}

    def __init__(self, engine, channel_name: str, setting: dict) -> None:
        """Constructor"""
        super().__init__(engine, channel_name, setting)

        # Parameters
        self.alpha: list = [float(a) for a in self.setting["alpha"]]
        self.p: list = [float(pi) for pi in self.setting["p"]]

    def build_noise(self) -> NoiseModel:
        """Delay moments"""
        return delay_channel_noise(self.alpha, self.p)

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Each packet is delivered once, after a delay drawn from p"""
        alpha: np.ndarray = np.asarray(self.alpha)
        probs: np.ndarray = np.asarray(self.p)
        delays: np.ndarray = rng.choice(alpha.size, size=horizon, p=probs / probs.sum())

        packets: np.ndarray = np.zeros((horizon, alpha.size))
        packets[np.arange(horizon), delays] = alpha[delays]
        return packets
