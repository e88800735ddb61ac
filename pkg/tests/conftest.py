import numpy as np
import pytest

from fundusloc.imaging import BinaryMask, RasterImage


def make_gray(arr) -> RasterImage:
    return RasterImage(np.asarray(arr, dtype=np.uint8))


def make_rgb(arr) -> RasterImage:
    return RasterImage(np.asarray(arr, dtype=np.uint8))


def make_mask(arr) -> BinaryMask:
    return BinaryMask(np.asarray(arr, dtype=bool))


def random_mask(rng, h=32, w=32, density=0.5) -> BinaryMask:
    return BinaryMask(rng.random((h, w)) < density)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Shared 12-image synthetic corpus at small render size."""
    from fundusloc.synth import generate_corpus

    out = tmp_path_factory.mktemp("corpus")
    result = generate_corpus(12, seed=4242, out_dir=out, sizes=(300, 360))
    return out, result
