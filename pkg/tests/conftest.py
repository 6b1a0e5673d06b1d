import numpy as np
import pytest

from pdmc.codec import EncoderConfig, prepare_view
from pdmc.scene_io import SceneSpec, generate_scene


SMALL_CFG = EncoderConfig(n_regs_color=40, n_regs_depth=30, depth_seed_cell=8)


@pytest.fixture(scope="session")
def small_scene():
    """3 views, 64x48, four planes, light noise."""
    return generate_scene(SceneSpec(n_views=3, width=64, height=48,
                                    plane_count=4, rng_seed=7,
                                    noise_sigma=0.01))


@pytest.fixture(scope="session")
def small_cfg():
    return SMALL_CFG


@pytest.fixture(scope="session")
def small_contexts(small_scene):
    return [prepare_view(v, SMALL_CFG) for v in small_scene]


@pytest.fixture(scope="session")
def coplanar_scene():
    """Noiseless scene: piecewise-planar, color edges match depth edges."""
    return generate_scene(SceneSpec(n_views=3, width=64, height=48,
                                    plane_count=4, rng_seed=3,
                                    noise_sigma=0.0))


def random_rotation(rng) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
