"""One-step attacks, label-free hard/adversarial objectives, and hard-point training."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError, StructureError
from .mlp import (PROB_FLOOR, Batch, InitScheme, MlpParams, MlpSpec, Output, TrainLog,
                  feature_network, forward, grad_input, init_random, predict, softmax,
                  train_sgd)

CSV_HEADER = ("epsilon", "accuracy", "mode", "source_id", "target_id", "attack_kind", "seed")
L2_FLOOR = 1e-12

# default epsilon sweeps for [0, 1]-scaled 784-pixel images
L2_EPSILONS = tuple(np.round(np.arange(0.0, 5.0001, 0.5), 10))
SIGN_EPSILONS = tuple(np.round(np.arange(0.0, 0.30001, 0.03), 10))


class AttackKind(str, enum.Enum):
    SIGN_GRADIENT = "sign"
    L2_ONE_STEP = "l2"


class AttackMode(str, enum.Enum):
    DIRECT = "direct"
    TRANSFER = "transfer"


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind = AttackKind.L2_ONE_STEP
    epsilon: float = 0.0
    clip_min: float = 0.0
    clip_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.epsilon < 0:
            raise DomainError("epsilon must be non-negative")
        if not self.clip_min < self.clip_max:
            raise DomainError("clip_min must be below clip_max")


@dataclass(frozen=True)
class HardBatchConfig:
    ascent_steps: int = 5
    step_size: float = 2.0
    stay_in_box: bool = True
    clip_min: float = 0.0
    clip_max: float = 1.0

    def __post_init__(self):
        if self.ascent_steps < 1:
            raise DomainError("ascent_steps must be >= 1")
        if self.step_size < 0:
            raise DomainError("step_size must be non-negative")


@dataclass(frozen=True, eq=False)
class AttackResult:
    epsilons: np.ndarray
    accuracy: np.ndarray
    mode: AttackMode
    source_id: str = "source"
    target_id: str = "target"
    kind: AttackKind = AttackKind.L2_ONE_STEP
    seed: int | None = None

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        acc = np.asarray(self.accuracy, dtype=float)
        if eps.shape != acc.shape:
            raise ShapeError("epsilons and accuracy must have the same length")
        if np.any((acc < 0) | (acc > 1)):
            raise DomainError("accuracies must lie in [0, 1]")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "accuracy", acc)
        object.__setattr__(self, "mode", AttackMode(self.mode))
        object.__setattr__(self, "kind", AttackKind(self.kind))

    def at(self, eps: float) -> float:
        i = np.flatnonzero(np.isclose(self.epsilons, eps, atol=1e-12))
        if i.size == 0:
            raise KeyError(eps)
        return float(self.accuracy[i[0]])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        seed = "" if self.seed is None else self.seed
        for e, a in zip(self.epsilons, self.accuracy):
            w.writerow([repr(float(e)), repr(float(a)), self.mode.value, self.source_id,
                        self.target_id, self.kind.value, seed])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> AttackResult:
        """Parse CSV text, or read it from a path (a ``Path`` or a one-line string)."""
        is_path = isinstance(source, Path) or (isinstance(source, str) and "\n" not in source)
        text = Path(source).read_text() if is_path else str(source)
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or tuple(rows[0].keys()) != CSV_HEADER:
            raise ValueError("not an attack-result CSV")
        seed = rows[0]["seed"]
        return cls([float(r["epsilon"]) for r in rows], [float(r["accuracy"]) for r in rows],
                   rows[0]["mode"], rows[0]["source_id"], rows[0]["target_id"],
                   rows[0]["attack_kind"], int(seed) if seed else None)


# -- label-free objectives -------------------------------------------------

def _entropy_objective(probabilities_in: bool):
    """Shannon entropy of the output distribution and its gradient w.r.t. the output.

    With ``probabilities_in`` the output already is a softmax; otherwise it
    is treated as logits and the gradient is taken through the softmax.
    """
    def obj(out):
        p = out if probabilities_in else softmax(out)
        logp = np.log(np.maximum(p, PROB_FLOOR))
        H = -(p * logp).sum(axis=1)
        if probabilities_in:
            g = -(logp + 1.0)
        else:
            g = -p * (logp + H[:, None])
        return H, g
    return obj


def _self_entropy_parts(params: MlpParams):
    return _entropy_objective(params.spec.output_activation is Output.SOFTMAX)


def self_entropy_objective(params: MlpParams, inputs) -> np.ndarray:
    """Cross entropy of the network's output distribution against itself, per sample."""
    return _self_entropy_parts(params)(forward(params, inputs).output)[0]


def self_entropy_grad(params: MlpParams, inputs) -> np.ndarray:
    return grad_input(params, inputs, _self_entropy_parts(params))


def adversarial_objective(params: MlpParams, inputs) -> np.ndarray:
    return self_entropy_objective(params, inputs)


def adversarial_objective_grad(params: MlpParams, inputs) -> np.ndarray:
    return self_entropy_grad(params, inputs)


def hard_objective_mlp(params: MlpParams, inputs) -> np.ndarray:
    """Entropy of the softmax over the penultimate-layer features, per sample."""
    return self_entropy_objective(feature_network(params), inputs)


def hard_objective_grad(params: MlpParams, inputs) -> np.ndarray:
    return self_entropy_grad(feature_network(params), inputs)


# -- attacks ----------------------------------------------------------------

def _loss_direction_grad(params: MlpParams, inputs, labels) -> np.ndarray:
    """d/dx of the per-sample cross entropy, softmax applied to identity outputs."""
    y = np.asarray(labels)
    probs_in = params.spec.output_activation is Output.SOFTMAX

    def obj(out):
        p = out if probs_in else softmax(out)
        rows = np.arange(len(y))
        if probs_in:
            g = np.zeros_like(p)
            g[rows, y] = -1.0 / np.maximum(p[rows, y], PROB_FLOOR)
        else:
            g = p.copy()
            g[rows, y] -= 1.0
        return -np.log(np.maximum(p[rows, y], PROB_FLOOR)), g
    return grad_input(params, inputs, obj)


def attack_direction(params: MlpParams, inputs, labels, kind) -> np.ndarray:
    """Unit perturbation whose multiple by epsilon is the one-step attack."""
    kind = AttackKind(kind)
    g = _loss_direction_grad(params, inputs, labels)
    if kind is AttackKind.SIGN_GRADIENT:
        return np.sign(g)
    norm = np.linalg.norm(g.reshape(len(g), -1), axis=1)
    # zero gradients leave the input where it is
    return g / np.maximum(norm, L2_FLOOR).reshape((-1,) + (1,) * (g.ndim - 1))


def attack(params: MlpParams, batch: Batch, spec: AttackSpec) -> np.ndarray:
    """One-step loss-ascent perturbation of ``batch.inputs``, clipped to the box.

    Sign attack: ``x + eps * sign(grad)``. L2 attack: ``x + eps * grad / |grad|_2``
    per sample.
    """
    if batch.labels is None:
        raise ShapeError("attacks need true labels")
    x = np.asarray(batch.inputs, dtype=float)
    d = attack_direction(params, x, batch.labels, spec.kind)
    return np.clip(x + spec.epsilon * d, spec.clip_min, spec.clip_max)


# -- hard batches and training -----------------------------------------------

def ascend_hard_objective(params: MlpParams, inputs, steps: int, step_size: float,
                          box: tuple | None = (0.0, 1.0)) -> np.ndarray:
    """``steps`` plain gradient-ascent moves on the hard objective."""
    x = np.array(inputs, dtype=float)
    if steps == 0 or step_size == 0.0:
        return x
    fnet = feature_network(params)
    for _ in range(steps):
        x = x + step_size * self_entropy_grad(fnet, x)
        if box is not None:
            x = np.clip(x, box[0], box[1])
    return x


def gen_hard_batch(params: MlpParams, batch: Batch, cfg: HardBatchConfig) -> Batch:
    """Move the batch uphill on the hard objective; labels are carried over."""
    box = (cfg.clip_min, cfg.clip_max) if cfg.stay_in_box else None
    x = ascend_hard_objective(params, batch.inputs, cfg.ascent_steps, cfg.step_size, box)
    return Batch(x, batch.labels)


@dataclass
class TrainConfig:
    epochs: int = 5
    lr: float = 0.1
    batch_size: int = 64
    decay: bool = True
    init: InitScheme = InitScheme.SCALED_NORMAL
    seed: int = 0


def train_reference(spec: MlpSpec, inputs, labels, cfg: TrainConfig,
                    log: TrainLog | None = None) -> MlpParams:
    params = init_random(spec, cfg.init, cfg.seed)
    return train_sgd(params, inputs, labels, cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed,
                     cfg.decay, log=log)


def adv_train(spec: MlpSpec, inputs, labels, cfg: TrainConfig, hard: HardBatchConfig,
              log: TrainLog | None = None) -> MlpParams:
    """SGD where every natural step is followed by a step on its hard batch.

    The hard batch is generated from the parameters produced by the natural
    step and keeps the natural batch's labels.
    """
    if len(labels) == 0:
        raise DomainError("training set is empty")
    if spec.n_layers < 2:
        raise StructureError("hard batches need a feature layer")
    params = init_random(spec, cfg.init, cfg.seed)
    return train_sgd(params, inputs, labels, cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed,
                     cfg.decay, extra_batch=lambda p, b: gen_hard_batch(p, b, hard), log=log)


def evaluate_attack(target: MlpParams, source: MlpParams, inputs, labels, kind,
                    epsilons, clip=(0.0, 1.0), source_id: str = "source",
                    target_id: str = "target", seed: int | None = None,
                    chunk: int = 2000) -> AttackResult:
    """Accuracy of ``target`` on one-step examples crafted on ``source``, per epsilon."""
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(labels)
    if source.spec.input_dim != target.spec.input_dim or x.shape[1] != source.spec.input_dim:
        raise ShapeError("source, target and inputs must share the input dimension")
    eps = np.asarray(epsilons, dtype=float)
    correct = np.zeros(len(eps))
    for s in range(0, len(y), chunk):
        xb, yb = x[s:s + chunk], y[s:s + chunk]
        d = attack_direction(source, xb, yb, kind)
        for k, e in enumerate(eps):
            xa = np.clip(xb + e * d, clip[0], clip[1])
            correct[k] += np.sum(predict(target, xa) == yb)
    mode = AttackMode.DIRECT if (source is target or source == target) else AttackMode.TRANSFER
    return AttackResult(eps, correct / len(y), mode, source_id, target_id, kind, seed)


# -- robust-feature diagnostic ---------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureGap:
    clean_corr: np.ndarray
    adv_corr: np.ndarray
    feature_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def gap(self) -> np.ndarray:
        return self.clean_corr - self.adv_corr


def _pair_subset(inputs, labels, class_pair):
    y = np.asarray(labels)
    a, b = class_pair
    keep = (y == a) | (y == b)
    if not np.any(y[keep] == a) or not np.any(y[keep] == b):
        raise DomainError(f"need samples of both classes {class_pair}")
    return np.asarray(inputs, dtype=float)[keep], y[keep], np.where(y[keep] == a, 1.0, -1.0)


def feature_gap_table(params: MlpParams, inputs, labels, class_pair, spec: AttackSpec) -> FeatureGap:
    """Label correlation of every penultimate feature before and after the attack.

    Samples outside ``class_pair`` are dropped and ``y = +1`` for
    ``class_pair[0]``, ``-1`` for ``class_pair[1]``. Each feature is centred
    by its clean mean; the attack is run against the full classifier with
    the original class labels.
    """
    x, cls, ypm = _pair_subset(inputs, labels, class_pair)
    xa = attack(params, Batch(x, cls), spec)
    f_clean = forward(params, x).penultimate
    f_adv = forward(params, xa).penultimate
    mu = f_clean.mean(axis=0)
    clean = ((f_clean - mu) * ypm[:, None]).mean(axis=0)
    adv = ((f_adv - mu) * ypm[:, None]).mean(axis=0)
    return FeatureGap(clean, adv, np.arange(f_clean.shape[1]))


def feature_robustness_gap(params: MlpParams, feature_index: int, inputs, labels, class_pair,
                           spec: AttackSpec) -> tuple[float, float]:
    width = params.spec.layer_widths[-2]
    if not 0 <= feature_index < width:
        raise IndexError(f"feature index {feature_index} outside [0, {width})")
    table = feature_gap_table(params, inputs, labels, class_pair, spec)
    return float(table.clean_corr[feature_index]), float(table.adv_corr[feature_index])
