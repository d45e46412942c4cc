import numpy as np
import pytest

from svxsynth.volume import (LabelVolume, MaskVolume, MultiModalVolume,
                             VolumeMeta)


def make_volume(dims, channels=1, fill=None, seed=0):
    """Random (or constant) f32 volume in [0, 1], dims in (X, Y, Z) order."""
    x, y, z = dims
    meta = VolumeMeta(dims, channels, "f32")
    if fill is not None:
        data = np.full((channels, z, y, x), fill, dtype=np.float32)
    else:
        rng = np.random.default_rng(seed)
        data = rng.random((channels, z, y, x)).astype(np.float32)
    return MultiModalVolume(meta, data)


def make_labels(dims, values):
    x, y, z = dims
    arr = np.asarray(values, dtype=np.uint32).reshape((z, y, x))
    return LabelVolume(VolumeMeta(dims, 1, "u32"), arr)


def make_mask(dims, values):
    x, y, z = dims
    arr = np.asarray(values, dtype=np.uint8).reshape((z, y, x))
    return MaskVolume(VolumeMeta(dims, 1, "u8"), arr)


@pytest.fixture
def small_phantom():
    from svxsynth.phantom import PhantomSpec, generate_phantom

    spec = PhantomSpec(dims=(24, 24, 16), lesion_count=(2, 3),
                       lesion_radius=(3.0, 5.0), seed=7)
    return generate_phantom(spec)
