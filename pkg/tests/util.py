"""Synthetic photograph generators shared across the test modules.

Real datasets are not available at desk scale, so tests run on seeded
procedural images: smooth low-frequency color fields plus pixel noise,
optionally scaled down to low-light levels.
"""

import numpy as np

from lowlight.image_io import ColorSpace, PlanarImage


def synth_photo(height: int, width: int, seed: int, noise: float = 0.04) -> PlanarImage:
    """A colorful, well-exposed synthetic photo with texture noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    planes = []
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        py, px = rng.uniform(0.0, 2.0 * np.pi, size=2)
        base = (0.5
                + 0.25 * np.sin(2.0 * np.pi * fy * yy / height + py)
                + 0.25 * np.cos(2.0 * np.pi * fx * xx / width + px))
        planes.append(base)
    img = np.stack(planes) + rng.normal(0.0, noise, size=(3, height, width))
    return PlanarImage(ColorSpace.RGB, np.clip(img, 0.0, 1.0))


def dark_photo(height: int, width: int, seed: int, target_mean: float = 0.15,
               noise: float = 0.04) -> PlanarImage:
    """A low-light synthetic photo whose mean brightness is under 0.3."""
    bright = synth_photo(height, width, seed, noise=noise)
    scale = target_mean / max(float(bright.data.mean()), 1e-6)
    return PlanarImage(ColorSpace.RGB, np.clip(bright.data * scale, 0.0, 1.0))


def random_rgb(height: int, width: int, seed: int) -> PlanarImage:
    """Uniform-random RGB values (no spatial structure)."""
    rng = np.random.default_rng(seed)
    return PlanarImage(ColorSpace.RGB, rng.random((3, height, width), dtype=np.float32))


def gray_image(height: int, width: int, value: float) -> PlanarImage:
    return PlanarImage(ColorSpace.GRAY, np.full((1, height, width), value, dtype=np.float32))


def interior_check_weights(hidden: int = 4, seed: int = 3):
    """Weights crafted so a small cascade stays away from clamp boundaries.

    Kernels are tamed and the illumination estimator gets a positive output
    bias, keeping v+u, y/x and y+s strictly inside their clamp ranges for
    mid-gray inputs -- which makes central finite differences trustworthy.
    """
    from lowlight.sci_model import init_weights

    w = init_weights(hidden_channels=hidden, seed=seed)
    for layer in w.h_theta + w.k_vartheta:
        layer.kernel.values *= 0.5
    w.h_theta[-1].bias.values[:] = 0.3
    return w


def interior_luma(height: int = 8, width: int = 8, seed: int = 2) -> np.ndarray:
    """(1,1,H,W) float64 plane in [0.3, 0.6] with all-distinct neighbor values."""
    rng = np.random.default_rng(seed)
    return 0.3 + 0.3 * rng.random((1, 1, height, width))


def assert_fd_point_is_interior(trace, margin: float = 1e-2, gap: float = 1e-4) -> None:
    """Fail loudly if the gradient-check point sits near a clamp or |.| kink."""
    y = trace.y
    eps = trace.weights.epsilon
    for st in trace.stages:
        p = st.v + st.u
        q = y / st.x
        r = y + st.s
        assert p.min() > eps + margin and p.max() < 1.0 - margin
        assert q.min() > margin and q.max() < 1.0 - margin
        assert r.min() > margin and r.max() < 1.0 - margin
        for diff in (st.x[:, :, :, :-1] - st.x[:, :, :, 1:],
                     st.x[:, :, :-1, :] - st.x[:, :, 1:, :]):
            assert np.abs(diff).min() > gap
