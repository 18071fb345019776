"""Fetch MNIST and Fashion-MNIST into the plain-IDX layout the package reads.

Both come from npm tarballs (``npm pack``), which only needs the npm
registry to be reachable:

* ``mnist-data`` ships the four original IDX files; they are copied as is.
* ``fashion-mnist`` ships one JSON file per class holding 7000 rows of 784
  pixel bytes. Rows of the wrong length are dropped, the first 6000 rows of
  each class become the training split and the last 1000 the test split,
  and each split is shuffled with ``default_rng(seed)`` before being written
  as IDX.

Usage: python scripts/fetch_data.py [DATA_DIR] [--seed 0]
Point ``POINTWISE_LAB_DATA`` at DATA_DIR afterwards (default ./data).
"""
import argparse
import json
import shutil
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

import numpy as np

MNIST_PKG = "mnist-data@1.2.6"
FASHION_PKG = "fashion-mnist@1.1.0"
IDX_NAMES = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
TRAIN_PER_CLASS = 6000


def npm_unpack(spec: str, workdir: Path) -> Path:
    out = subprocess.run(["npm", "pack", spec, "--silent"], cwd=workdir, check=True,
                         capture_output=True, text=True).stdout.split()[-1]
    dest = workdir / spec.split("@")[0]
    with tarfile.open(workdir / out) as tar:
        tar.extractall(dest, filter="data")
    return dest / "package"


def write_images(path: Path, images: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        fh.write(images.astype(np.uint8).tobytes())


def write_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x801, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


def fetch_mnist(dest: Path, workdir: Path) -> None:
    pkg = npm_unpack(MNIST_PKG, workdir)
    dest.mkdir(parents=True, exist_ok=True)
    for name in IDX_NAMES:
        shutil.copyfile(pkg / "data" / name, dest / name)


def fetch_fashion(dest: Path, workdir: Path, seed: int) -> None:
    pkg = npm_unpack(FASHION_PKG, workdir)
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(10):
        rows = json.loads((pkg / "src" / "clothes" / f"{c}.json").read_text())["data"]
        rows = np.array([r for r in rows if len(r) == 784], dtype=np.uint8)
        train_x.append(rows[:TRAIN_PER_CLASS])
        test_x.append(rows[TRAIN_PER_CLASS:])
        train_y.append(np.full(len(train_x[-1]), c))
        test_y.append(np.full(len(test_x[-1]), c))
    rng = np.random.default_rng(seed)
    dest.mkdir(parents=True, exist_ok=True)
    for prefix, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x, y = np.concatenate(xs), np.concatenate(ys)
        perm = rng.permutation(len(y))
        write_images(dest / f"{prefix}-images-idx3-ubyte", x[perm])
        write_labels(dest / f"{prefix}-labels-idx1-ubyte", y[perm])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("data_dir", nargs="?", default="data", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        fetch_mnist(args.data_dir / "mnist", Path(tmp))
        fetch_fashion(args.data_dir / "fashion-mnist", Path(tmp), args.seed)
    print(f"wrote IDX files under {args.data_dir.resolve()}")


if __name__ == "__main__":
    main()
