import numpy as np

from ..model import NoiseModel
from ..template import ChannelTemplate


class CustomChannel(ChannelTemplate):
    """FIR gains given directly by their moments"""

    display_name: str = "Custom FIR"

    default_setting: dict = {"mu": [1.0], "beta": [[0.0]]}

    def __init__(self, engine, channel_name: str, setting: dict) -> None:
        """Constructor"""
        super().__init__(engine, channel_name, setting)

        self.mu: list = [float(m) for m in self.setting["mu"]]
        self.beta: list = [[float(b) for b in row] for row in self.setting["beta"]]

    def build_noise(self) -> NoiseModel:
        return NoiseModel(mu=self.mu, beta=self.beta)

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Gaussian packets with mean mu and covariance beta"""
        noise: NoiseModel = self.noise_model()
        values, vectors = np.linalg.eigh(noise.beta)
        root: np.ndarray = vectors * np.sqrt(np.clip(values, 0, None))

        normal: np.ndarray = rng.standard_normal((horizon, noise.mu.size))
        return noise.mu + normal @ root.T
