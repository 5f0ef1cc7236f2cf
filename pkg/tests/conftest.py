import numpy as np
import pytest

from geowarp.core import ImageBuffer


def smooth_image(n: int, seed: int = 0, channels: int = 3) -> ImageBuffer:
    """Photo-like procedural test image: a sum of low-frequency cosines."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:n, 0:n] / n
    img = np.zeros((n, n, channels))
    for c in range(channels):
        for _ in range(6):
            fx, fy = rng.uniform(0.5, 4.0, 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            img[..., c] += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * fx * xs + ph[0]) \
                * np.cos(2 * np.pi * fy * ys + ph[1])
    img -= img.min()
    img /= img.max()
    return ImageBuffer(img)


def ramp_image(n: int) -> ImageBuffer:
    """Coordinate oracle image: R = x/n, G = y/n, so colors decode positions."""
    ys, xs = np.mgrid[0:n, 0:n]
    img = np.zeros((n, n, 3))
    img[..., 0] = xs / n
    img[..., 1] = ys / n
    return ImageBuffer(img)


def decode_ramp(image: ImageBuffer, n: int):
    """Positions encoded by a (possibly warped) ramp_image(n)."""
    return image.data[..., 0] * n, image.data[..., 1] * n


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
