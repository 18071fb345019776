"""Run every experiment in sequence and leave the CSVs under runs/.

    python scripts/reproduce_figures.py [--out runs] [--seed 0] [--skip-images]

The image experiments need POINTWISE_LAB_DATA (see fetch_data.py); with
``--skip-images`` only the polynomial and landscape runs are made.
"""
import argparse
import sys
from pathlib import Path

from pointwise_lab.cli import main as cli


def run(*args) -> None:
    code = cli([str(a) for a in args])
    if code:
        sys.exit(code)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-images", action="store_true")
    args = ap.parse_args()
    out, seed = args.out, args.seed

    run("poly-compare", "--out", out / "poly_compare")
    run("grid-train", "--seed", seed, "--out", out / "grid_train")
    run("hard-objective", "--seed", seed, "--out", out / "hard_objective")
    run("mlp-landscape", "--seed", seed, "--out", out / "mlp_landscape")
    if args.skip_images:
        return
    for ds in ("mnist", "fashion-mnist"):
        trained = out / f"adv_train_{ds}"
        run("adv-train", "--seed", seed, "--out", trained, f"dataset={ds}")
        run("attack-eval", "--out", out / f"attack_eval_{ds}", f"dataset={ds}",
            f"reference={trained / 'reference.npz'}", f"adv={trained / 'adv.npz'}")
    run("feature-gap", "--out", out / "feature_gap_mnist",
        f"checkpoint={out / 'adv_train_mnist' / 'reference.npz'}")


if __name__ == "__main__":
    main()
