import json

import cv2
import numpy as np
import pytest

from illumkit import InputError, LinearImage, load_image, save_corrected, save_image_png16


def test_png16_round_trip_within_quantization(tmp_path):
    rng = np.random.default_rng(0)
    img = LinearImage(rng.uniform(0.0, 2.0, size=(12, 16, 3)))
    path = tmp_path / "img.png"
    scale = save_image_png16(path, img)
    assert scale == pytest.approx(65535.0 / img.data.max())
    back = load_image(path)
    # loader maps uint16 to [0, 1]; undo the recorded scale to compare
    restored = back.data * (65535.0 / scale)
    step = img.data.max() / 65535.0
    assert np.abs(restored - img.data).max() <= step / 2 + 1e-12


def test_png16_peak_maps_to_full_range(tmp_path):
    img = LinearImage(np.full((4, 4, 3), 0.25))
    path = tmp_path / "img.png"
    save_image_png16(path, img)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    assert raw.dtype == np.uint16
    assert raw.max() == 65535


def test_save_corrected_writes_sidecar(tmp_path):
    img = LinearImage(np.full((4, 4, 3), 0.5))
    path = tmp_path / "out.png"
    save_corrected(path, img, {"illuminant": [0.5, 0.5, 0.7]})
    sidecar = json.loads((tmp_path / "out.png.json").read_text())
    assert sidecar["format"] == "png16"
    assert sidecar["scale"] == pytest.approx(65535.0 / 0.5)
    assert sidecar["illuminant"] == [0.5, 0.5, 0.7]


def test_load_uint8_png(tmp_path):
    path = tmp_path / "u8.png"
    data = np.full((5, 5, 3), 128, dtype=np.uint8)
    cv2.imwrite(str(path), data)
    img = load_image(path)
    assert np.allclose(img.data, 128 / 255.0, atol=1e-12)


def test_load_gamma_decode(tmp_path):
    path = tmp_path / "g.png"
    cv2.imwrite(str(path), np.full((5, 5, 3), 32768, dtype=np.uint16))
    linear = load_image(path, linear=True)
    encoded = load_image(path, linear=False)
    assert np.allclose(encoded.data, linear.data ** 2.2, atol=1e-12)


def test_load_bgr_to_rgb_order(tmp_path):
    path = tmp_path / "c.png"
    bgr = np.zeros((2, 2, 3), dtype=np.uint8)
    bgr[:, :, 2] = 255  # red channel in BGR layout
    cv2.imwrite(str(path), bgr)
    img = load_image(path)
    assert np.allclose(img.data[:, :, 0], 1.0)
    assert np.allclose(img.data[:, :, 1:], 0.0)


def test_load_missing_file():
    with pytest.raises(InputError):
        load_image("/nonexistent/image.png")


def test_load_single_channel_rejected(tmp_path):
    path = tmp_path / "gray.png"
    cv2.imwrite(str(path), np.full((4, 4), 100, dtype=np.uint8))
    with pytest.raises(InputError):
        load_image(path)


def test_tiff_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = LinearImage(rng.uniform(0.1, 1.0, size=(6, 6, 3)))
    path = tmp_path / "img.tiff"
    u16 = np.round(img.data[:, :, ::-1] * 65535).astype(np.uint16)
    cv2.imwrite(str(path), u16)
    back = load_image(path)
    assert np.abs(back.data - img.data).max() <= 0.5 / 65535 + 1e-12
