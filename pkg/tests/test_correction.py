import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from illumkit import (
    DiagonalTransform,
    InvalidIlluminantError,
    LinearImage,
    apply_illuminant,
    correct_image,
    correction_transform,
    normalize_illuminant,
)


def test_round_trip_identity_50_illuminants():
    rng = np.random.default_rng(0)
    img = LinearImage(rng.uniform(0.01, 1.0, size=(8, 8, 3)))
    for _ in range(50):
        ill = normalize_illuminant(rng.uniform(0.05, 1.0, size=3))
        relit = apply_illuminant(img, ill)
        back = correct_image(relit, ill)
        assert np.abs(back.data - img.data).max() < 1e-9


def test_correct_then_apply_is_identity():
    rng = np.random.default_rng(1)
    img = LinearImage(rng.uniform(0.01, 1.0, size=(6, 6, 3)))
    ill = normalize_illuminant([0.3, 0.5, 0.8])
    back = apply_illuminant(correct_image(img, ill), ill)
    assert np.abs(back.data - img.data).max() < 1e-9


def test_neutral_illuminant_is_identity():
    rng = np.random.default_rng(2)
    img = LinearImage(rng.uniform(0.01, 1.0, size=(5, 5, 3)))
    neutral = normalize_illuminant([1, 1, 1])
    out = correct_image(img, neutral)
    assert np.abs(out.data - img.data).max() < 1e-12


def test_known_gains_closed_form():
    # illuminant (1,2,2)/3: gains are (sqrt(3), sqrt(3)/2, sqrt(3)/2)
    ill = normalize_illuminant([1, 2, 2])
    t = correction_transform(ill)
    assert np.allclose(t.gains, [math.sqrt(3), math.sqrt(3) / 2, math.sqrt(3) / 2],
                       atol=1e-12)


def test_correction_maps_illuminant_to_gray():
    ill = normalize_illuminant([0.2, 0.5, 0.9])
    lit = LinearImage(np.tile(ill.as_array(), (3, 3, 1)))
    out = correct_image(lit, ill)
    assert np.allclose(out.data, 1 / math.sqrt(3), atol=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3))
def test_round_trip_property(raw):
    img = LinearImage(np.full((2, 2, 3), 0.5))
    ill = normalize_illuminant(raw)
    back = correct_image(apply_illuminant(img, ill), ill)
    assert np.abs(back.data - img.data).max() < 1e-9


def test_diagonal_transform_applies_gains():
    img = LinearImage(np.ones((2, 2, 3)))
    t = DiagonalTransform(np.array([0.5, 2.0, 3.0]))
    out = t.apply(img)
    assert np.allclose(out.data[0, 0], [0.5, 2.0, 3.0], atol=1e-15)


def test_diagonal_transform_rejects_nonpositive():
    with pytest.raises(InvalidIlluminantError):
        DiagonalTransform(np.array([1.0, 0.0, 1.0]))
    with pytest.raises(InvalidIlluminantError):
        DiagonalTransform(np.array([1.0, -2.0, 1.0]))


def test_zero_channel_illuminant_rejected():
    class FakeIll:
        def as_array(self):
            return np.array([1.0, 0.0, 0.0])

    with pytest.raises(InvalidIlluminantError):
        correction_transform(FakeIll())


def test_narrowband_render_round_trip(narrowband_scenes):
    # with delta sensors a diagonal transform undoes the illuminant exactly:
    # corrected scenes depend only on reflectance, not on the light
    corrected = []
    for img, gt, _ in narrowband_scenes[:4]:
        out = correct_image(img, gt)
        corrected.append(out.data / out.data.max())
    for other in corrected[1:]:
        assert np.abs(other - corrected[0]).max() < 1e-9
