import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")

from illumkit.synth import (
    SceneFamily,
    complementary_reflectance_bank,
    default_wavelengths,
    gaussian_sensors,
    narrowband_sensors,
    random_reflectance_bank,
    render_dataset,
)


@pytest.fixture(scope="session")
def default_scenes():
    """24 small Mondrians, random bank and layouts."""
    return render_dataset(SceneFamily(patch_size=8), 24, rng_seed=7)


@pytest.fixture(scope="session")
def grayworld_scenes():
    """Scenes whose mean reflectance is exactly flat: gray world holds exactly."""
    wl = default_wavelengths()
    bank = complementary_reflectance_bank(8, wl, np.random.default_rng(11))
    family = SceneFamily(reflectance_bank=bank, layout="balanced", patch_size=8)
    return render_dataset(family, 20, rng_seed=5)


def whitepatch_family(patch_size=8, seed=11):
    """Every scene contains a spectrally flat patch brighter than all others."""
    wl = default_wavelengths()
    rng = np.random.default_rng(seed)
    bank = random_reflectance_bank(15, wl, rng, lo=0.05, hi=0.90)
    bank = np.vstack([bank, np.full((1, wl.size), 0.95)])
    return SceneFamily(reflectance_bank=bank, layout="balanced", patch_size=patch_size)


@pytest.fixture(scope="session")
def whitepatch_scenes():
    return render_dataset(whitepatch_family(), 20, rng_seed=5)


@pytest.fixture(scope="session")
def narrowband_scenes():
    # fixed balanced layout: scenes differ only in the illuminant
    wl = default_wavelengths()
    bank = random_reflectance_bank(16, wl, np.random.default_rng(2))
    family = SceneFamily(sensor_responses=narrowband_sensors(wl),
                         reflectance_bank=bank, layout="balanced", patch_size=8)
    return render_dataset(family, 12, rng_seed=9)
