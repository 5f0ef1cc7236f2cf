import numpy as np

from geowarp import ImageBuffer


def smooth_image(n: int, seed: int = 0) -> ImageBuffer:
    """Photo-like procedural image: a sum of low-frequency cosines."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:n, 0:n] / n
    img = np.zeros((n, n, 3))
    for c in range(3):
        for _ in range(6):
            fx, fy = rng.uniform(0.5, 4.0, 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            img[..., c] += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * fx * xs + ph[0]) \
                * np.cos(2 * np.pi * fy * ys + ph[1])
    img -= img.min()
    img /= img.max()
    return ImageBuffer(img)
