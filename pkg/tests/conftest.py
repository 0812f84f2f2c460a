import numpy as np
import pytest

from ffdic.dic import DicParams
from ffdic.imaging import SpeckleSpec, gaussian_blur, generate_dots, rasterize

# Scaled-down correlation parameters so unit tests run on small frames.
SMALL_DIC = DicParams(subset_size=21, step=10, search_radius=5)


def render_speckle(size=128, seed=3, diameter=7.0, spacing=10.5, shift=(0.0, 0.0), blur=0.0):
    """A quick speckle frame with optional blur and no noise."""
    spec = SpeckleSpec(
        dot_diameter=diameter, mean_spacing=spacing, blur_sigma=blur, noise_sigma=0.0, seed=seed
    )
    dots = generate_dots(spec, size, size)
    img = rasterize(dots, shift=shift)
    return gaussian_blur(img, blur) if blur else img


@pytest.fixture(scope="session")
def speckle_128():
    return render_speckle(size=128, seed=3)


@pytest.fixture(scope="session")
def speckle_pair_int32():
    """Reference and a pure (3, 2) pixel shift of it, 128 px square."""
    ref = render_speckle(size=128, seed=3)
    deformed = np.roll(ref, (2, 3), axis=(0, 1))
    return ref, deformed
