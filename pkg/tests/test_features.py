import math

import numpy as np
import pytest
from PIL import Image

from cbt.errors import ConfigError, DimensionError, FormatError, InputError
from cbt.features import (FilterBankConfig, angular_profile, build_filter_bank, extract_features,
                          frequency_grid, load_image, preprocess, radial_profile)


def test_default_bank_shape(default_bank):
    assert default_bank.filters.shape == (24, 141, 141)
    assert len(default_bank) == 24


def test_masks_in_unit_interval_and_zero_at_dc(default_bank):
    f = default_bank.filters
    assert f.min() >= 0.0 and f.max() <= 1.0
    assert np.all(f[:, 0, 0] == 0.0)


@pytest.mark.parametrize("p,q,side", [(1, 1, 16), (2, 3, 31), (4, 6, 64)])
def test_any_config_has_zero_dc(p, q, side):
    bank = build_filter_bank(FilterBankConfig(num_scales=p, num_orientations=q, image_side=side))
    assert np.all(bank.filters[:, 0, 0] == 0.0)


def test_center_frequencies():
    cfg = FilterBankConfig()
    expected = [1 / (3 * 1.7**i) for i in range(4)]
    assert cfg.center_frequencies() == pytest.approx(expected, rel=1e-15)
    assert cfg.orientations() == pytest.approx([j * math.pi / 6 for j in range(6)])


def test_radial_profile_peaks_at_center_frequency():
    # fine radial grid; the log-Gaussian exponent vanishes only at r = omega
    r = np.linspace(1e-4, 0.5, 500001)
    prof = radial_profile(r, 1 / 3, 0.65)
    assert r[np.argmax(prof)] == pytest.approx(1 / 3, abs=2e-6)
    assert radial_profile(np.array([1 / 3]), 1 / 3, 0.65)[0] == pytest.approx(1.0, abs=1e-15)
    assert radial_profile(np.array([0.0]), 1 / 3, 0.65)[0] == 0.0


def test_single_mask_peak_on_grid():
    # 141 / 3 = 47, so bin 47 on the horizontal frequency axis sits exactly at 1/3
    bank = build_filter_bank(FilterBankConfig(num_scales=1, num_orientations=1))
    row = bank.filters[0, 0, :71]
    assert int(np.argmax(row)) == 47
    assert row[47] == pytest.approx(1.0, abs=1e-12)


def test_angular_profile_is_one_at_orientation():
    for t in (0.0, math.pi / 6, 5 * math.pi / 6):
        assert angular_profile(np.array([t]), t, 0.4)[0] == pytest.approx(1.0)
    # wrapping: distance between -pi+eps and pi-eps is small
    assert angular_profile(np.array([math.pi - 0.01]), -math.pi + 0.01, 0.4)[0] > 0.99


def test_frequency_grid_dc():
    r, _ = frequency_grid(8)
    assert r[0, 0] == 0.0


@pytest.mark.parametrize("kwargs", [
    {"num_scales": 0}, {"num_orientations": 0}, {"min_wavelength": 1.5},
    {"scale_multiplier": 1.0}, {"radial_bandwidth": 0.0}, {"angular_bandwidth": -1.0},
    {"radial_bandwidth": 1.0}, {"image_side": 0},
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        build_filter_bank(FilterBankConfig(**kwargs))


def test_bank_is_read_only(small_bank):
    with pytest.raises(ValueError):
        small_bank.filters[0, 0, 0] = 1.0


# -- preprocessing -----------------------------------------------------------

def test_preprocess_identity(rng):
    img = rng.random((141, 141))
    assert np.array_equal(preprocess(img, 141), img)


def test_preprocess_rgb_uses_luminance():
    rgb = np.zeros((10, 10, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    out = preprocess(rgb, 10)
    assert np.allclose(out, 0.299)


def test_preprocess_nearest_upscale_round_trip(rng):
    img = rng.random((141, 141))
    up = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
    assert up.shape == (282, 282)
    assert np.max(np.abs(preprocess(up, 141) - img)) < 1e-6


def test_preprocess_center_crops_non_square(rng):
    img = rng.random((20, 30))
    assert np.array_equal(preprocess(img, 20), img[:, 5:25])


def test_preprocess_uint16_scaling():
    img = np.full((4, 4), 65535, dtype=np.uint16)
    assert np.all(preprocess(img, 4) == 1.0)


def test_preprocess_deterministic(rng):
    img = rng.integers(0, 256, size=(97, 120, 3), dtype=np.uint8)
    assert np.array_equal(preprocess(img, 50), preprocess(img, 50))
    out = preprocess(img, 50)
    assert out.shape == (50, 50) and out.min() >= 0 and out.max() <= 1


def test_preprocess_empty_raises():
    with pytest.raises(InputError):
        preprocess(np.zeros((0, 5)), 10)


def test_preprocess_from_file(tmp_path, rng):
    arr = rng.integers(0, 256, size=(30, 30), dtype=np.uint8)
    p = tmp_path / "a.png"
    Image.fromarray(arr).save(p)
    assert np.allclose(preprocess(p, 30), arr / 255.0)
    p16 = tmp_path / "b.png"
    arr16 = (arr.astype(np.uint16) * 257)
    Image.fromarray(arr16).save(p16)
    assert np.allclose(preprocess(p16, 30), arr16 / 65535.0)


def test_undecodable_file(tmp_path):
    p = tmp_path / "junk.png"
    p.write_bytes(b"not an image at all")
    with pytest.raises(FormatError):
        load_image(p)


# -- feature extraction ------------------------------------------------------

def test_feature_length_default(default_bank, rng):
    f = extract_features(rng.random((141, 141)), default_bank)
    assert f.shape == (6 * 4 * 141 * 141,) == (477144,)
    assert np.all(np.isfinite(f)) and f.min() >= 0


def test_zero_image_gives_zero_features(small_bank):
    assert not np.any(extract_features(np.zeros((33, 33)), small_bank))


def test_constant_image_rejected_by_dc_notch(small_bank):
    f = extract_features(np.full((33, 33), 0.7), small_bank, scale_factor=100)
    assert f.max() <= 1e-9 * 100


@pytest.mark.parametrize("alpha", [2.5, -0.3, 1e-3])
def test_magnitude_homogeneity(small_bank, rng, alpha):
    img = rng.random((33, 33))
    base = extract_features(img, small_bank)
    scaled = extract_features(alpha * img, small_bank)
    assert np.allclose(scaled, abs(alpha) * base, rtol=1e-6, atol=1e-9 * base.max())


def test_layout_is_scale_major(small_bank, rng):
    img = rng.random((33, 33))
    f = extract_features(img, small_bank, scale_factor=1.0)
    resp = np.fft.ifft2(np.fft.fft2(img) * small_bank.filters[7])
    n2 = 33 * 33
    assert np.allclose(f[7 * n2:8 * n2], np.abs(resp).ravel())


def test_extraction_deterministic(small_bank, rng):
    img = rng.random((33, 33))
    assert np.array_equal(extract_features(img, small_bank), extract_features(img, small_bank))


def test_size_mismatch(small_bank):
    with pytest.raises(DimensionError):
        extract_features(np.zeros((32, 32)), small_bank)
