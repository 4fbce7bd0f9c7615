"""Log-Gabor filter bank and feature extraction.

Filters live in the frequency domain on the unshifted ``np.fft.fftfreq``
grid, so a mask can multiply ``np.fft.fft2(image)`` directly.  Each filter
is the product of a log-Gaussian radial term and a Gaussian angular term
(one-sided, so the spatial response is complex and its magnitude is the
local amplitude).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DimensionError, FormatError, InputError

DEFAULT_SIDE = 141
DEFAULT_SCALE_FACTOR = 100.0

# ITU-R BT.601 luma weights.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FilterBankConfig:
    num_scales: int = 4
    num_orientations: int = 6
    min_wavelength: float = 3.0
    scale_multiplier: float = 1.7
    radial_bandwidth: float = 0.65
    angular_bandwidth: float = 1.3
    image_side: int = DEFAULT_SIDE

    def validate(self) -> None:
        if self.num_scales < 1 or self.num_orientations < 1:
            raise ConfigError("num_scales and num_orientations must be >= 1")
        if self.min_wavelength < 2:
            raise ConfigError(f"min_wavelength must be >= 2 pixels, got {self.min_wavelength}")
        if self.scale_multiplier <= 1:
            raise ConfigError(f"scale_multiplier must be > 1, got {self.scale_multiplier}")
        if self.radial_bandwidth <= 0 or self.angular_bandwidth <= 0:
            raise ConfigError("bandwidths must be positive")
        if self.radial_bandwidth == 1:
            # log(1) = 0 would make the radial Gaussian degenerate
            raise ConfigError("radial_bandwidth must differ from 1")
        if self.image_side < 1:
            raise ConfigError(f"image_side must be positive, got {self.image_side}")

    @property
    def feature_length(self) -> int:
        return self.num_scales * self.num_orientations * self.image_side**2

    def center_frequencies(self) -> list[float]:
        return [1.0 / (self.min_wavelength * self.scale_multiplier**i) for i in range(self.num_scales)]

    def orientations(self) -> list[float]:
        return [j * math.pi / self.num_orientations for j in range(self.num_orientations)]


@dataclass(frozen=True)
class LogGaborFilterBank:
    config: FilterBankConfig
    filters: np.ndarray = field(repr=False)  # (p*q, N, N), scale-major

    def __len__(self) -> int:
        return self.filters.shape[0]


def radial_profile(radius, center_frequency: float, bandwidth_ratio: float):
    """Log-Gaussian radial term; equals 1 at ``radius == center_frequency``.

    ``bandwidth_ratio`` is the ratio of the Gaussian's standard deviation to
    the center frequency on a log axis (0.65 gives roughly two octaves).
    Zero radius maps to 0.
    """
    r = np.asarray(radius, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-(np.log(r[pos] / center_frequency) ** 2) / (2 * math.log(bandwidth_ratio) ** 2))
    return out


def angular_profile(theta, orientation: float, sigma: float):
    """Gaussian in the wrapped angular distance to ``orientation``."""
    theta = np.asarray(theta, dtype=float)
    d = np.abs(np.arctan2(np.sin(theta - orientation), np.cos(theta - orientation)))
    return np.exp(-(d**2) / (2 * sigma**2))


def frequency_grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    """Radius (cycles/pixel) and angle of every unshifted FFT bin."""
    f = np.fft.fftfreq(side)
    u, v = np.meshgrid(f, f)  # u varies along columns, v along rows
    return np.hypot(u, v), np.arctan2(-v, u)


def build_filter_bank(config: FilterBankConfig | None = None) -> LogGaborFilterBank:
    config = config or FilterBankConfig()
    config.validate()
    radius, theta = frequency_grid(config.image_side)
    # angular_bandwidth is the orientation spacing expressed in angular sigmas
    sigma_theta = (math.pi / config.num_orientations) / config.angular_bandwidth

    radials = [radial_profile(radius, w, config.radial_bandwidth) for w in config.center_frequencies()]
    angulars = [angular_profile(theta, t, sigma_theta) for t in config.orientations()]
    filters = np.stack([rad * ang for rad in radials for ang in angulars])
    filters[:, 0, 0] = 0.0
    filters.setflags(write=False)
    return LogGaborFilterBank(config=config, filters=filters)


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file (PNG/BMP/PGM/TIF) into a numpy array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("P", "LA", "PA", "CMYK", "YCbCr", "1"):
                im = im.convert("RGBA" if "A" in mode else "RGB")
            arr = np.array(im)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise FormatError(f"cannot decode image {path}: {exc}") from exc
    if mode == "I" and arr.size and arr.min() >= 0 and arr.max() <= 65535:
        arr = arr.astype(np.uint16)
    return arr


def _to_unit_gray(raw: np.ndarray) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[..., :3]
        if arr.shape[2] == 1:
            arr = arr[..., 0]
    if arr.dtype == bool:
        arr = arr.astype(float)
    elif np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(float) / np.iinfo(arr.dtype).max
    else:
        arr = arr.astype(float)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr @ LUMA_WEIGHTS
    if arr.ndim != 2:
        raise FormatError(f"unsupported image shape {np.shape(raw)}")
    if not np.all(np.isfinite(arr)):
        raise InputError("image contains non-finite values")
    return np.clip(arr, 0.0, 1.0)


def _center_crop(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    return img[top:top + s, left:left + s]


def _resize_axis(img: np.ndarray, size: int, axis: int) -> np.ndarray:
    # half-pixel-centred linear interpolation with edge clamping
    n = img.shape[axis]
    if n == size:
        return img
    pos = (np.arange(size) + 0.5) * (n / size) - 0.5
    pos = np.clip(pos, 0, n - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    a = np.take(img, lo, axis=axis)
    b = np.take(img, hi, axis=axis)
    shape = [1, 1]
    shape[axis] = size
    frac = frac.reshape(shape)
    return a * (1 - frac) + b * frac


def preprocess(raw_image, target_side: int = DEFAULT_SIDE) -> np.ndarray:
    """Grayscale, center-crop to a square, and bilinearly resize to ``target_side``.

    Accepts a numpy array (2-D gray, or RGB/RGBA in the last axis) or a path.
    Integer images are scaled by their dtype maximum; float images are taken
    to already be in [0, 1] and are clipped.
    """
    if isinstance(raw_image, (str, Path)):
        raw_image = load_image(raw_image)
    if target_side < 1:
        raise InputError(f"target_side must be positive, got {target_side}")
    arr = np.asarray(raw_image)
    if arr.size == 0 or 0 in arr.shape[:2]:
        raise InputError("image has no pixels")
    img = _center_crop(_to_unit_gray(arr))
    img = _resize_axis(_resize_axis(img, target_side, 0), target_side, 1)
    return np.clip(img, 0.0, 1.0)


def filter_responses(image: np.ndarray, bank: LogGaborFilterBank) -> np.ndarray:
    """Complex spatial responses, shape ``(p*q, N, N)``."""
    image = np.asarray(image, dtype=float)
    side = bank.config.image_side
    if image.shape != (side, side):
        raise DimensionError(f"image shape {image.shape} does not match filter bank side {side}")
    spectrum = np.fft.fft2(image)
    return np.fft.ifft2(spectrum[None, :, :] * bank.filters, axes=(-2, -1))


def extract_features(image: np.ndarray, bank: LogGaborFilterBank,
                     scale_factor: float = DEFAULT_SCALE_FACTOR) -> np.ndarray:
    """Flat feature vector of scaled response magnitudes.

    Layout is scale-major, then orientation, then row-major pixels; length
    is ``p * q * N**2``.
    """
    mags = np.abs(filter_responses(image, bank))
    mags *= scale_factor
    return mags.ravel()
