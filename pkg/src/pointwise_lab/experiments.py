"""Experiment runners behind the command-line subcommands.

Each runner takes a config dataclass and an output directory, writes its
CSV / checkpoint files there and returns a JSON-able summary. Runners are
deterministic given their config; timings live only in the CLI's metadata.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .adversarial import (L2_EPSILONS, SIGN_EPSILONS, AttackKind, AttackSpec, HardBatchConfig,
                          TrainConfig, adv_train, adversarial_objective, evaluate_attack,
                          feature_gap_table, hard_objective_mlp, train_reference)
from .datasets import ImageDataset, load_named, make_grid2d, subset_indices
from .errors import DomainError
from .mlp import (Hidden, MlpSpec, TrainLog, accuracy, forward, init_random, load_checkpoint,
                  save_checkpoint)
from .points import (LabeledSet1D, chebyshev_grid, chebyshev_nodes, equispaced_grid,
                     find_hard_points, hard_density_chebyshev, nn_label)
from .poly import PolyFeatureMap, eval_f, eval_g, fit_hinge_svm

GRIDS = {"chebyshev": chebyshev_grid, "equispaced": equispaced_grid}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    """Plain CSV with shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_pgm(path: Path, image: np.ndarray) -> Path:
    """8-bit binary PGM, min-max scaled; row 0 of ``image`` is drawn at the bottom."""
    a = np.asarray(image, dtype=float)[::-1]
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)
    data = np.round(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())
    return path


# -- polynomial classifiers ------------------------------------------------

@dataclass
class PolyCompareConfig:
    degrees: list = field(default_factory=lambda: [1, 3, 5, 15, 29])
    samples: int = 1001


def run_poly_compare(cfg: PolyCompareConfig, out: Path) -> dict:
    if not cfg.degrees or min(cfg.degrees) < 1:
        raise DomainError("degrees must all be >= 1")
    x = np.linspace(0.0, 1.0, cfg.samples)
    files = []
    for n in cfg.degrees:
        path = write_csv(out / f"poly_compare_n{n}.csv", ["x", "f", "g"],
                         zip(x, eval_f(n, x), eval_g(n, x)))
        files.append(path.name)
    return {"files": files}


@dataclass
class GridTrainConfig:
    degree: int = 30
    grid_kinds: list = field(default_factory=lambda: ["chebyshev", "equispaced"])
    m_values: list = field(default_factory=lambda: [10, 20, 31, 40, 60, 100])
    error_samples: int = 10001
    curve_samples: int = 1001
    reg: float = 1e-6
    iters: int = 20000
    restarts: int = 1
    seed: int = 0


def grid_train_errors(cfg: GridTrainConfig):
    """Yield ``(kind, m, classifier, dense sign error)`` for every grid and size."""
    fm = PolyFeatureMap("chebyshev", cfg.degree)
    dense = np.linspace(0.0, 1.0, cfg.error_samples)
    truth = nn_label(dense)
    for kind in cfg.grid_kinds:
        if kind not in GRIDS:
            raise DomainError(f"unknown grid kind {kind!r}; choose from {sorted(GRIDS)}")
        for m in cfg.m_values:
            pts = LabeledSet1D.from_labeler(GRIDS[kind](m), nn_label)
            clf = fit_hinge_svm(pts, fm, reg=cfg.reg, iters=cfg.iters, seed=cfg.seed,
                                restarts=cfg.restarts)
            yield kind, m, clf, float(np.mean(clf.predict(dense) != truth))


def run_grid_train(cfg: GridTrainConfig, out: Path) -> dict:
    xc = np.linspace(0.0, 1.0, cfg.curve_samples)
    errors, curves, flagged = [], [], []
    for kind, m, clf, err in grid_train_errors(cfg):
        errors.append((kind, m, err, clf.converged, clf.objective))
        curves.extend((kind, m, x, v) for x, v in zip(xc, clf(xc)))
        if not clf.converged:
            flagged.append(f"{kind}:{m}")
    write_csv(out / "grid_train_errors.csv", ["grid", "m", "error", "converged", "objective"],
              errors)
    write_csv(out / "grid_train_curves.csv", ["grid", "m", "x", "value"], curves)
    return {"errors": {f"{k}:{m}": e for k, m, e, *_ in errors}, "not_converged": flagged}


@dataclass
class HardObjectiveConfig:
    n: int = 10
    samples: int = 10001
    restarts: int = 200
    steps: int = 2000
    seed: int = 0


def run_hard_objective(cfg: HardObjectiveConfig, out: Path) -> dict:
    x = np.linspace(0.0, 1.0, cfg.samples)
    write_csv(out / "hard_density.csv", ["x", "density"], zip(x, hard_density_chebyshev(cfg.n, x)))
    nodes = chebyshev_nodes(cfg.n).points
    write_csv(out / "hard_nodes.csv", ["node", "density"],
              zip(nodes, hard_density_chebyshev(cfg.n, nodes)))
    hp = find_hard_points(lambda t: hard_density_chebyshev(cfg.n, t), cfg.n, cfg.restarts,
                          cfg.steps, seed=cfg.seed)
    pts = hp.grid.points
    write_csv(out / "hard_points.csv", ["point", "density"],
              zip(pts, hard_density_chebyshev(cfg.n, pts)))
    gaps = [float(np.min(np.abs(nodes - p))) for p in hp.interior]
    return {"shortfall": hp.shortfall, "n_maxima": hp.n_maxima,
            "max_distance_to_node": max(gaps) if gaps else None}


# -- random-network landscape ----------------------------------------------

@dataclass
class LandscapeConfig:
    seed: int = 0
    resolution: int = 128
    layer_widths: list = field(default_factory=lambda: [2, 100, 100, 100, 5])
    hidden: str = "tanh"
    bound: float = 1.0
    images: bool = True


def landscape_fields(cfg: LandscapeConfig):
    spec = MlpSpec(tuple(cfg.layer_widths), Hidden(cfg.hidden), "softmax")
    params = init_random(spec, "standard_normal", cfg.seed)
    b = float(cfg.bound)
    grid = make_grid2d(cfg.resolution, ((-b, b), (-b, b)))
    cls = forward(params, grid.points).output.argmax(axis=1)
    adv = adversarial_objective(params, grid.points)
    hard = hard_objective_mlp(params, grid.points)
    return grid, cls, adv, hard


def run_mlp_landscape(cfg: LandscapeConfig, out: Path) -> dict:
    grid, cls, adv, hard = landscape_fields(cfg)
    write_csv(out / "landscape.csv",
              ["x", "y", "predicted_class", "adversarial_objective", "hard_objective"],
              zip(grid.points[:, 0], grid.points[:, 1], cls, adv, hard))
    if cfg.images:
        write_pgm(out / "landscape_class.pgm", grid.as_image(cls))
        write_pgm(out / "landscape_adversarial.pgm", grid.as_image(adv))
        write_pgm(out / "landscape_hard.pgm", grid.as_image(hard))
    rho = float(spearmanr(adv, hard).statistic)
    return {"spearman": rho, "adversarial_max": float(adv.max()), "hard_max": float(hard.max()),
            "classes_present": sorted(int(c) for c in np.unique(cls))}


# -- image experiments -----------------------------------------------------

@dataclass
class AdvTrainConfig:
    dataset: str = "mnist"
    data_dir: str | None = None
    pool: int | None = 18000
    fraction: float = 1 / 3
    layer_widths: list = field(default_factory=lambda: [784, 128, 128, 10])
    hidden: str = "relu"
    epochs: int = 5
    lr: float = 0.1
    batch_size: int = 64
    decay: bool = True
    ascent_steps: int = 5
    step_size: float = 2.0
    seed: int = 0


def training_pool(ds: ImageDataset, pool: int | None, seed: int) -> np.ndarray:
    """Stratified indices of the training pool (all indices when ``pool`` is None)."""
    if pool is None or pool >= len(ds):
        return np.arange(len(ds))
    return subset_indices(ds.labels, pool / len(ds), seed)


def train_pair(cfg: AdvTrainConfig, train: ImageDataset):
    """Reference net on the pool and hard-batch net on ``fraction`` of the pool."""
    pool = train.take(training_pool(train, cfg.pool, cfg.seed))
    sub = pool.take(subset_indices(pool.labels, cfg.fraction, cfg.seed))
    spec = MlpSpec(tuple(cfg.layer_widths), Hidden(cfg.hidden), "softmax")
    tcfg = TrainConfig(cfg.epochs, cfg.lr, cfg.batch_size, cfg.decay, seed=cfg.seed)
    hard = HardBatchConfig(cfg.ascent_steps, cfg.step_size)
    ref_log, adv_log = TrainLog([]), TrainLog([])
    ref = train_reference(spec, pool.images, pool.labels, tcfg, ref_log)
    adv = adv_train(spec, sub.images, sub.labels, tcfg, hard, adv_log)
    return ref, adv, ref_log, adv_log, len(pool), len(sub)


def _write_log(path: Path, log: TrainLog) -> None:
    keys = ["step", "epoch", "lr", "loss"] + (["hard_loss"] if log.rows and "hard_loss" in log.rows[0] else [])
    write_csv(path, keys, ([r[k] for k in keys] for r in log.rows))


def run_adv_train(cfg: AdvTrainConfig, out: Path) -> dict:
    train = load_named(cfg.dataset, "train", cfg.data_dir)
    test = load_named(cfg.dataset, "test", cfg.data_dir)
    ref, adv, ref_log, adv_log, n_pool, n_sub = train_pair(cfg, train)
    extra = {"dataset": cfg.dataset, "train_digest": train.source_digest}
    save_checkpoint(ref, out / "reference.npz", {**extra, "role": "reference", "n_train": n_pool})
    save_checkpoint(adv, out / "adv.npz", {**extra, "role": "adv", "n_train": n_sub})
    _write_log(out / "train_log_reference.csv", ref_log)
    _write_log(out / "train_log_adv.csv", adv_log)
    return {"n_reference_train": n_pool, "n_adv_train": n_sub,
            "reference_test_accuracy": accuracy(ref, test.images, test.labels),
            "adv_test_accuracy": accuracy(adv, test.images, test.labels),
            "data_digests": {"train": train.source_digest, "test": test.source_digest}}


@dataclass
class AttackEvalConfig:
    dataset: str = "mnist"
    data_dir: str | None = None
    reference: str = "reference.npz"
    adv: str = "adv.npz"
    kind: str = "l2"
    epsilons: list | None = None
    limit: int | None = None
    seed: int = 0


def default_epsilons(kind) -> list:
    return list(L2_EPSILONS if AttackKind(kind) is AttackKind.L2_ONE_STEP else SIGN_EPSILONS)


def attack_curves(ref, adv, x, y, kind, epsilons, seed=0) -> dict:
    """The four accuracy-vs-epsilon curves: direct on each net and transfer both ways."""
    pairs = {"direct_reference": (ref, ref, "reference", "reference"),
             "direct_adv": (adv, adv, "adv", "adv"),
             "transfer_adv_to_reference": (ref, adv, "adv", "reference"),
             "transfer_reference_to_adv": (adv, ref, "reference", "adv")}
    return {name: evaluate_attack(t, s, x, y, kind, epsilons, source_id=sid, target_id=tid,
                                  seed=seed)
            for name, (t, s, sid, tid) in pairs.items()}


def run_attack_eval(cfg: AttackEvalConfig, out: Path) -> dict:
    test = load_named(cfg.dataset, "test", cfg.data_dir)
    if cfg.limit is not None:
        test = test.take(np.arange(min(cfg.limit, len(test))))
    ref = load_checkpoint(cfg.reference)
    adv = load_checkpoint(cfg.adv)
    eps = cfg.epsilons if cfg.epsilons is not None else default_epsilons(cfg.kind)
    curves = attack_curves(ref, adv, test.images, test.labels, cfg.kind, eps, cfg.seed)
    for name, res in curves.items():
        res.to_csv(out / f"{name}.csv")
    return {"files": [f"{n}.csv" for n in curves],
            "clean": {n: r.at(0.0) for n, r in curves.items() if 0.0 in r.epsilons},
            "data_digests": {"test": test.source_digest}}


@dataclass
class FeatureGapConfig:
    checkpoint: str = "reference.npz"
    dataset: str = "mnist"
    data_dir: str | None = None
    split: str = "test"
    class_pair: list = field(default_factory=lambda: [3, 7])
    kind: str = "l2"
    epsilon: float = 1.0


def run_feature_gap(cfg: FeatureGapConfig, out: Path) -> dict:
    ds = load_named(cfg.dataset, cfg.split, cfg.data_dir)
    params = load_checkpoint(cfg.checkpoint)
    table = feature_gap_table(params, ds.images, ds.labels, tuple(cfg.class_pair),
                              AttackSpec(cfg.kind, cfg.epsilon))
    write_csv(out / "feature_gap.csv", ["feature", "clean_corr", "adv_corr", "gap"],
              zip(table.feature_index, table.clean_corr, table.adv_corr, table.gap))
    top = int(np.argmax(table.gap))
    return {"largest_gap_feature": top, "largest_gap": float(table.gap[top]),
            "features_with_positive_gap": int(np.sum(table.gap > 0)),
            "data_digests": {cfg.split: ds.source_digest}}


SUBCOMMANDS = {
    "poly-compare": (PolyCompareConfig, run_poly_compare),
    "grid-train": (GridTrainConfig, run_grid_train),
    "hard-objective": (HardObjectiveConfig, run_hard_objective),
    "mlp-landscape": (LandscapeConfig, run_mlp_landscape),
    "adv-train": (AdvTrainConfig, run_adv_train),
    "attack-eval": (AttackEvalConfig, run_attack_eval),
    "feature-gap": (FeatureGapConfig, run_feature_gap),
}
