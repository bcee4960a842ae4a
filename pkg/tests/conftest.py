import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mbstereo.imageio import Image

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def quantized_image(rng, h, w, c=3) -> Image:
    """Random image on the 8-bit grid, so 8-bit carriers round-trip exactly."""
    return Image(np.round(rng.random((h, w, c)) * 255.0) / 255.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
