"""IDX image datasets, deterministic subsets and batches, and 2-D evaluation grids.

Expected layout under the data directory (``$POINTWISE_LAB_DATA`` or an
explicit path)::

    <data_dir>/mnist/train-images-idx3-ubyte
    <data_dir>/mnist/train-labels-idx1-ubyte
    <data_dir>/mnist/t10k-images-idx3-ubyte
    <data_dir>/mnist/t10k-labels-idx1-ubyte
    <data_dir>/fashion-mnist/...   (same four names)

Files are plain (uncompressed) IDX. ``scripts/fetch_data.py`` creates them.
"""
from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DomainError, FormatError
from .mlp import Batch

DATA_ENV = "POINTWISE_LAB_DATA"
IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATASET_NAMES = ("mnist", "fashion-mnist")
SPLIT_PREFIX = {"train": "train", "test": "t10k"}


@dataclass(frozen=True, eq=False)
class ImageDataset:
    images: np.ndarray
    labels: np.ndarray
    name: str = ""
    source_digest: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DomainError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def take(self, idx, name: str | None = None) -> ImageDataset:
        idx = np.asarray(idx)
        return ImageDataset(self.images[idx], self.labels[idx],
                            self.name if name is None else name, self.source_digest)


def _read_header(raw: bytes, magic: int, ndim: int, path: Path) -> tuple[int, ...]:
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise FormatError(f"{path}: file shorter than its {head}-byte header", field="header")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise FormatError(f"{path}: magic number 0x{got:08x}, expected 0x{magic:08x}",
                          field="magic")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    expected = head + int(np.prod(dims, dtype=np.int64))
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes, header dims {dims} need {expected}",
                          field="dims")
    return dims


def load_idx(images_path, labels_path, name: str | None = None) -> ImageDataset:
    """Read an IDX image file (magic 0x803) and label file (magic 0x801).

    Pixels are scaled to [0, 1] by /255 and flattened to ``rows * cols``.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    raw_img = images_path.read_bytes()
    raw_lab = labels_path.read_bytes()
    n_img, rows, cols = _read_header(raw_img, IMAGE_MAGIC, 3, images_path)
    (n_lab,) = _read_header(raw_lab, LABEL_MAGIC, 1, labels_path)
    if n_img != n_lab:
        raise FormatError(f"{n_img} images but {n_lab} labels", field="count")
    pixels = np.frombuffer(raw_img, dtype=np.uint8, offset=16).reshape(n_img, rows * cols)
    labels = np.frombuffer(raw_lab, dtype=np.uint8, offset=8).astype(np.int64)
    digest = hashlib.sha256()
    digest.update(raw_img)
    digest.update(raw_lab)
    return ImageDataset(pixels / 255.0, labels, name or images_path.parent.name,
                        digest.hexdigest())


def data_dir(path=None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(DATA_ENV)
    if not env:
        raise FileNotFoundError(f"set {DATA_ENV} or pass a data directory")
    return Path(env)


def dataset_files(name: str, split: str, root=None) -> tuple[Path, Path]:
    if name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset {name!r}; choose from {DATASET_NAMES}")
    prefix = SPLIT_PREFIX[split]
    base = data_dir(root) / name
    return base / f"{prefix}-images-idx3-ubyte", base / f"{prefix}-labels-idx1-ubyte"


def load_named(name: str, split: str = "train", root=None) -> ImageDataset:
    img, lab = dataset_files(name, split, root)
    return load_idx(img, lab, name=f"{name}-{split}")


def subset_indices(labels, fraction: float, seed: int = 0) -> np.ndarray:
    """Stratified sample without replacement, returned in ascending order.

    The total is ``round(n * fraction)``; per-class quotas are the floors of
    the proportional counts, with the leftover handed out by largest remainder
    (ties to the smaller class id), so each class is within one sample of
    proportional.
    """
    labels = np.asarray(labels)
    if not 0.0 < fraction <= 1.0:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    classes, counts = np.unique(labels, return_counts=True)
    total = int(round(len(labels) * fraction))
    if total < 1:
        raise DomainError(f"fraction {fraction} of {len(labels)} samples is empty")
    exact = counts * (total / len(labels))
    quota = np.floor(exact).astype(int)
    left = total - quota.sum()
    order = np.lexsort((classes, -(exact - quota)))
    quota[order[:left]] += 1
    rng = np.random.default_rng(seed)
    picked = [rng.permutation(np.flatnonzero(labels == c))[:q] for c, q in zip(classes, quota)]
    return np.sort(np.concatenate(picked))


def subset_fraction(ds: ImageDataset, fraction: float, seed: int = 0) -> ImageDataset:
    return ds.take(subset_indices(ds.labels, fraction, seed))


def batch_indices(n: int, batch_size: int, seed: int, epoch: int = 0) -> Iterator[np.ndarray]:
    """Index blocks of one shuffled epoch; the last block may be short."""
    if batch_size < 1:
        raise DomainError("batch_size must be >= 1")
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    for s in range(0, n, batch_size):
        yield perm[s:s + batch_size]


def batches(ds: ImageDataset, batch_size: int, shuffle_seed: int, epoch: int = 0) -> list[Batch]:
    return [Batch(ds.images[i], ds.labels[i])
            for i in batch_indices(len(ds), batch_size, shuffle_seed, epoch)]


@dataclass(frozen=True, eq=False)
class EvalGrid2D:
    """Row-major grid: point ``r * resolution + c`` is ``(xs[c], ys[r])``."""

    resolution: int
    bounds: tuple
    points: np.ndarray

    @property
    def xs(self) -> np.ndarray:
        return self.points[: self.resolution, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:: self.resolution, 1]

    def as_image(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.resolution, self.resolution)


def make_grid2d(resolution: int, bounds=((-1.0, 1.0), (-1.0, 1.0))) -> EvalGrid2D:
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return EvalGrid2D(resolution, ((x0, x1), (y0, y1)), pts)
