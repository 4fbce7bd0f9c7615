"""Image corpora, train/test splits, and a synthetic generator."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ArgumentError, IngestionError, ProtocolError
from .features import DEFAULT_SIDE, preprocess

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".bmp", ".pgm", ".ppm", ".tif", ".tiff", ".jpg", ".jpeg"}
_FVC_NAME = re.compile(r"^([A-Za-z0-9]+)_([A-Za-z0-9]+)$")


@dataclass(frozen=True)
class Subject:
    subject_id: str
    sample_ids: tuple[str, ...]
    images: tuple[np.ndarray, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class Dataset:
    subjects: tuple[Subject, ...]
    modality: str = "unknown"
    provenance: str = ""
    side: int = DEFAULT_SIDE

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    def samples(self):
        """Yield ``(subject_id, sample_id, image)`` in dataset order."""
        for s in self.subjects:
            for sid, img in zip(s.sample_ids, s.images):
                yield s.subject_id, sid, img


@dataclass(frozen=True)
class SplitProtocol:
    train_per_subject: int
    test_per_subject: int
    subject_limit: int | None = None


FACE_SPLIT = SplitProtocol(3, 2, 150)
FINGERPRINT_SPLIT = SplitProtocol(5, 3, 40)


def _sort_key(ident: str):
    # numeric ids sort numerically (FVC "2" before "10"); others lexicographically
    return (0, int(ident), "") if ident.isdigit() else (1, 0, ident)


def _image_files(folder: Path) -> list[Path]:
    return [p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES]


def load_dataset(root: str | Path, layout: str = "fvc", side: int = DEFAULT_SIDE,
                 modality: str = "unknown") -> Dataset:
    """Load and preprocess a corpus.

    ``layout="fvc"`` expects files named ``<subject>_<sample>.<ext>`` in one
    directory; ``layout="folders"`` expects one sub-directory per subject.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root {root} is not a directory")
    grouped: dict[str, list[tuple[str, Path]]] = {}
    if layout == "fvc":
        for p in _image_files(root):
            m = _FVC_NAME.match(p.stem)
            if not m:
                raise IngestionError(f"cannot parse subject_sample from file name {p}")
            grouped.setdefault(m.group(1), []).append((m.group(2), p))
    elif layout == "folders":
        for d in root.iterdir():
            if d.is_dir():
                files = _image_files(d)
                if files:
                    grouped[d.name] = [(p.stem, p) for p in files]
    else:
        raise IngestionError(f"unknown layout {layout!r} (expected 'fvc' or 'folders')")
    if not grouped:
        raise IngestionError(f"no images found under {root}")

    subjects = []
    for sub_id in sorted(grouped, key=_sort_key):
        entries = sorted(grouped[sub_id], key=lambda e: (_sort_key(e[0]), e[1].name))
        images = []
        for _, path in entries:
            try:
                images.append(preprocess(path, side))
            except Exception as exc:
                raise IngestionError(f"{path}: {exc}") from exc
        subjects.append(Subject(sub_id, tuple(e[0] for e in entries), tuple(images)))
    return Dataset(tuple(subjects), modality=modality, provenance=str(root), side=side)


def split(ds: Dataset, protocol: SplitProtocol) -> tuple[Dataset, Dataset]:
    """First ``train_per_subject`` samples train, the next ``test_per_subject`` test."""
    if protocol.train_per_subject < 1 or protocol.test_per_subject < 1:
        raise ProtocolError("split needs at least one train and one test sample per subject")
    subjects = ds.subjects if protocol.subject_limit is None else ds.subjects[:protocol.subject_limit]
    if len(subjects) < 2:
        raise ProtocolError(f"evaluation needs at least 2 subjects, have {len(subjects)}")
    a, b = protocol.train_per_subject, protocol.test_per_subject
    train, test = [], []
    for s in subjects:
        if len(s) < a + b:
            raise ProtocolError(f"subject {s.subject_id} has {len(s)} samples, protocol needs {a + b}")
        train.append(Subject(s.subject_id, s.sample_ids[:a], s.images[:a]))
        test.append(Subject(s.subject_id, s.sample_ids[a:a + b], s.images[a:a + b]))
    return replace(ds, subjects=tuple(train)), replace(ds, subjects=tuple(test))


def _band_limited_texture(rng: np.random.Generator, side: int) -> np.ndarray:
    """Zero-mean, unit-variance texture with a subject-specific spectrum.

    White noise is shaped by a random log-normal radial band, an orientation
    preference, and a smooth spatial contrast envelope, so different
    subjects differ in where and at which scales their energy sits.
    """
    f = np.fft.fftfreq(side)
    u, v = np.meshgrid(f, f)
    r = np.hypot(u, v)
    r[0, 0] = 1.0
    theta = np.arctan2(-v, u)

    center = math.exp(rng.uniform(math.log(0.04), math.log(0.25)))
    width = rng.uniform(0.35, 0.7)
    orient = rng.uniform(0, math.pi)
    anis = rng.uniform(0.0, 2.0)
    shape = np.exp(-(np.log(r / center) ** 2) / (2 * width**2))
    shape *= np.exp(anis * np.cos(2 * (theta - orient)))
    shape[0, 0] = 0.0
    noise = rng.standard_normal((side, side))
    tex = np.real(np.fft.ifft2(np.fft.fft2(noise) * shape))

    # smooth envelope: very low-pass noise mapped to [0.3, 1.7]
    env_noise = rng.standard_normal((side, side))
    low = np.exp(-(r / 0.02) ** 2)
    low[0, 0] = 0.0
    env = np.real(np.fft.ifft2(np.fft.fft2(env_noise) * low))
    env = (env - env.mean()) / (env.std() + 1e-12)
    tex *= 1.0 + 0.7 * np.tanh(env)
    return (tex - tex.mean()) / (tex.std() + 1e-12)


def synth_generate(num_subjects: int, samples_per_subject: int, noise_sigma: float = 0.02,
                   seed: int = 0, side: int = DEFAULT_SIDE, max_shift: int = 2,
                   contrast: float = 0.15) -> Dataset:
    """Synthetic corpus: per-subject texture plus per-sample noise and shift.

    Each sample is ``0.5 + contrast * texture`` translated circularly by up
    to ``max_shift`` pixels in each axis, plus Gaussian pixel noise with
    standard deviation ``noise_sigma``, clamped to [0, 1].
    """
    if num_subjects < 2 or samples_per_subject < 2:
        raise ArgumentError("need at least 2 subjects and 2 samples per subject")
    if noise_sigma < 0 or max_shift < 0:
        raise ArgumentError("noise_sigma and max_shift must be non-negative")
    width = len(str(num_subjects))
    subjects = []
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(num_subjects)):
        base_rng, sample_rng = (np.random.default_rng(s) for s in child.spawn(2))
        base = 0.5 + contrast * _band_limited_texture(base_rng, side)
        images = []
        for _ in range(samples_per_subject):
            img = base
            if max_shift:
                dy, dx = sample_rng.integers(-max_shift, max_shift + 1, size=2)
                img = np.roll(img, (int(dy), int(dx)), axis=(0, 1))
            if noise_sigma:
                img = img + sample_rng.normal(0.0, noise_sigma, size=img.shape)
            images.append(np.clip(img, 0.0, 1.0))
        subjects.append(Subject(str(k + 1).zfill(width),
                                tuple(str(j + 1) for j in range(samples_per_subject)),
                                tuple(images)))
    return Dataset(tuple(subjects), modality="synthetic",
                   provenance=f"synth(seed={seed}, sigma={noise_sigma}, shift={max_shift})", side=side)


def write_dataset(ds: Dataset, out_dir: str | Path) -> list[Path]:
    """Write samples as 16-bit PNGs named ``<subject>_<sample>.png`` (fvc layout)."""
    from PIL import Image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for sub, sample, img in ds.samples():
        p = out / f"{sub}_{sample}.png"
        Image.fromarray(np.round(img * 65535).astype(np.uint16)).save(p)
        paths.append(p)
    return paths
