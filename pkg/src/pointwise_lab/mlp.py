"""Small fully connected networks with hand-written backpropagation.

Layer ``k`` computes ``a_{k+1} = act(a_k @ W_k + b_k)``; hidden layers use
tanh or ReLU, the output layer softmax or identity. Everything runs in
float64 so gradients can be checked against finite differences.
"""
from __future__ import annotations

import enum
import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ShapeError, StructureError

CHECKPOINT_FORMAT = "pointwise-lab-mlp"
CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-12


class Hidden(str, enum.Enum):
    TANH = "tanh"
    RELU = "relu"


class Output(str, enum.Enum):
    SOFTMAX = "softmax"
    IDENTITY = "identity"


class InitScheme(str, enum.Enum):
    STANDARD_NORMAL = "standard_normal"
    SCALED_NORMAL = "scaled_normal"


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple[int, ...]
    hidden_activation: Hidden = Hidden.TANH
    output_activation: Output = Output.SOFTMAX

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise StructureError(f"need >= 2 layers of width >= 1, got {widths}")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "hidden_activation", Hidden(self.hidden_activation))
        object.__setattr__(self, "output_activation", Output(self.output_activation))

    @property
    def n_layers(self) -> int:
        """Number of weight matrices."""
        return len(self.layer_widths) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    def to_dict(self) -> dict:
        return {"layer_widths": list(self.layer_widths),
                "hidden_activation": self.hidden_activation.value,
                "output_activation": self.output_activation.value}

    @classmethod
    def from_dict(cls, d: dict) -> MlpSpec:
        return cls(tuple(d["layer_widths"]), d["hidden_activation"], d["output_activation"])


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights ``(fan_in, fan_out)`` and biases for every layer of ``spec``."""

    spec: MlpSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    seed: int | None = None

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        widths = self.spec.layer_widths
        if len(ws) != self.spec.n_layers or len(bs) != self.spec.n_layers:
            raise ShapeError(f"spec has {self.spec.n_layers} layers, got {len(ws)} weights")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (widths[k], widths[k + 1]) or b.shape != (widths[k + 1],):
                raise ShapeError(f"layer {k}: weight {w.shape}, bias {b.shape} "
                                 f"do not match widths {widths[k]}->{widths[k + 1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DomainError(f"layer {k} has non-finite entries")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return (self.spec == other.spec and self.seed == other.seed
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))

    __hash__ = None

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


@dataclass(frozen=True, eq=False)
class Gradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


@dataclass(frozen=True, eq=False)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True, eq=False)
class ForwardPass:
    """``activations[0]`` is the input, ``activations[-1]`` the network output.

    ``preactivations[k]`` is ``activations[k] @ W_k + b_k``.
    """

    activations: list
    preactivations: list

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]

    @property
    def penultimate(self) -> np.ndarray:
        return self.activations[-2]


def init_random(spec: MlpSpec, scheme: InitScheme | str = InitScheme.STANDARD_NORMAL,
                seed: int = 0) -> MlpParams:
    """Gaussian weights, zero biases.

    ``standard_normal`` draws every weight from N(0, 1); ``scaled_normal``
    uses N(0, 2 / fan_in).
    """
    scheme = InitScheme(scheme)
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        scale = 1.0 if scheme is InitScheme.STANDARD_NORMAL else np.sqrt(2.0 / fan_in)
        ws.append(rng.standard_normal((fan_in, fan_out)) * scale)
        bs.append(np.zeros(fan_out))
    return MlpParams(spec, tuple(ws), tuple(bs), seed)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _hidden(kind: Hidden, z):
    return np.tanh(z) if kind is Hidden.TANH else np.maximum(z, 0.0)


def _hidden_grad(kind: Hidden, z, a):
    if kind is Hidden.TANH:
        return 1.0 - a * a
    return (z > 0.0).astype(float)


def forward(params: MlpParams, inputs) -> ForwardPass:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ShapeError(f"expected inputs of width {params.spec.input_dim}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("inputs must be finite")
    spec = params.spec
    acts, pres = [x], []
    last = spec.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = acts[-1] @ w + b
        pres.append(z)
        if k < last:
            acts.append(_hidden(spec.hidden_activation, z))
        elif spec.output_activation is Output.SOFTMAX:
            acts.append(softmax(z))
        else:
            acts.append(z)
    return ForwardPass(acts, pres)


def predict(params: MlpParams, inputs, chunk: int = 4096) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    return np.concatenate([forward(params, x[i:i + chunk]).output.argmax(axis=1)
                           for i in range(0, len(x), chunk)])


def accuracy(params: MlpParams, inputs, labels) -> float:
    return float(np.mean(predict(params, inputs) == np.asarray(labels)))


def loss_xent(probs, labels) -> float:
    """Mean ``-log p[label]`` with probabilities floored at 1e-12."""
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    y = np.atleast_1d(np.asarray(labels))
    if np.any(y < 0) or np.any(y >= p.shape[1]):
        raise IndexError(f"labels must lie in [0, {p.shape[1]})")
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], PROB_FLOOR))))


# An objective maps the network output (n, k) to per-sample values (n,) and
# their gradient with respect to that output (n, k).
Objective = Callable[[np.ndarray], tuple]


def xent_objective(labels) -> Objective:
    """Per-sample cross entropy of probability outputs against ``labels``."""
    y = np.asarray(labels)

    def obj(p):
        rows = np.arange(len(y))
        py = np.maximum(p[rows, y], PROB_FLOOR)
        g = np.zeros_like(p)
        g[rows, y] = -1.0 / py
        return -np.log(py), g
    return obj


def linear_objective(w) -> Objective:
    """``<w, output>`` per sample."""
    w = np.asarray(w, dtype=float)
    return lambda out: (out @ w, np.broadcast_to(w, out.shape).copy())


def backward(params: MlpParams, fp: ForwardPass, grad_output: np.ndarray):
    """Reverse pass from ``d objective / d output``; returns (Gradients, d objective / d input)."""
    spec = params.spec
    out = fp.output
    if spec.output_activation is Output.SOFTMAX:
        dz = out * (grad_output - np.sum(out * grad_output, axis=1, keepdims=True))
    else:
        dz = np.asarray(grad_output, dtype=float)
    gw = [None] * spec.n_layers
    gb = [None] * spec.n_layers
    for k in range(spec.n_layers - 1, -1, -1):
        gw[k] = fp.activations[k].T @ dz
        gb[k] = dz.sum(axis=0)
        da = dz @ params.weights[k].T
        if k > 0:
            dz = da * _hidden_grad(spec.hidden_activation, fp.preactivations[k - 1],
                                   fp.activations[k])
    return Gradients(tuple(gw), tuple(gb)), da


def grad_params(params: MlpParams, batch: Batch, loss: str = "xent"):
    """Mean cross-entropy over ``batch`` and its exact parameter gradient."""
    if loss != "xent":
        raise ValueError(f"unsupported loss {loss!r}")
    if batch.labels is None:
        raise ShapeError("loss gradients need labels")
    if params.spec.output_activation is not Output.SOFTMAX:
        raise StructureError("cross entropy needs a softmax output")
    fp = forward(params, batch.inputs)
    y = np.asarray(batch.labels)
    n = len(y)
    # softmax + cross entropy collapse to p - onehot at the logits
    p = fp.output
    dz = p.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    spec = params.spec
    gw = [None] * spec.n_layers
    gb = [None] * spec.n_layers
    for k in range(spec.n_layers - 1, -1, -1):
        gw[k] = fp.activations[k].T @ dz
        gb[k] = dz.sum(axis=0)
        if k > 0:
            dz = (dz @ params.weights[k].T) * _hidden_grad(
                spec.hidden_activation, fp.preactivations[k - 1], fp.activations[k])
    return loss_xent(p, y), Gradients(tuple(gw), tuple(gb))


def grad_input(params: MlpParams, inputs, objective: Objective) -> np.ndarray:
    """Gradient of the summed per-sample ``objective`` with respect to ``inputs``.

    Rows are independent, so row ``i`` is the gradient of sample ``i``'s value.
    """
    x = np.asarray(inputs, dtype=float)
    fp = forward(params, x)
    _, g_out = objective(fp.output)
    _, gx = backward(params, fp, np.asarray(g_out, dtype=float))
    return gx.reshape(x.shape)


def sgd_step(params: MlpParams, grads: Gradients, lr: float) -> MlpParams:
    if lr < 0:
        raise ValueError("lr must be non-negative")
    ws = tuple(w - lr * g for w, g in zip(params.weights, grads.weights))
    bs = tuple(b - lr * g for b, g in zip(params.biases, grads.biases))
    return MlpParams(params.spec, ws, bs, params.seed)


def feature_network(params: MlpParams) -> MlpParams:
    """Copy of the network whose last layer is replaced by an identity map.

    The output becomes the post-activation features of the last hidden layer,
    so a ``d -> ... -> h -> k`` network turns into ``d -> ... -> h -> h``.
    """
    spec = params.spec
    if spec.n_layers < 2:
        raise StructureError("a single-layer network has no feature layer")
    h = spec.layer_widths[-2]
    fspec = MlpSpec(spec.layer_widths[:-1] + (h,), spec.hidden_activation, Output.IDENTITY)
    return MlpParams(fspec, params.weights[:-1] + (np.eye(h),),
                     params.biases[:-1] + (np.zeros(h),), params.seed)


def _linear_schedule(lr: float, total: int, decay: bool):
    return (lambda t: lr * (1.0 - t / total)) if decay else (lambda t: lr)


@dataclass
class TrainLog:
    """One row per optimisation step."""

    rows: list

    def losses(self) -> np.ndarray:
        return np.array([r["loss"] for r in self.rows])


def train_sgd(params: MlpParams, inputs, labels, epochs: int, lr: float = 0.1,
              batch_size: int = 64, seed: int = 0, decay: bool = True,
              extra_batch: Callable | None = None, log: TrainLog | None = None) -> MlpParams:
    """Mini-batch SGD on cross entropy.

    Each epoch reshuffles with a generator seeded by ``(seed, epoch)``. If
    ``extra_batch(params, batch)`` is given, every natural step is followed
    by a second step on the batch it returns, computed from the freshly
    updated parameters. With ``decay`` the rate falls linearly to zero over
    the run.
    """
    from .datasets import batch_indices
    from .errors import DivergenceError

    x = np.asarray(inputs, dtype=float)
    y = np.asarray(labels)
    per_epoch = -(-len(y) // batch_size)
    rate = _linear_schedule(lr, epochs * per_epoch, decay)
    t = 0
    for epoch in range(epochs):
        for idx in batch_indices(len(y), batch_size, seed, epoch):
            step_lr = rate(t)
            batch = Batch(x[idx], y[idx])
            loss, g = grad_params(params, batch)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {t}")
            params = sgd_step(params, g, step_lr)
            row = {"step": t, "epoch": epoch, "lr": step_lr, "loss": loss}
            if extra_batch is not None:
                hard = extra_batch(params, batch)
                hard_loss, g = grad_params(params, hard)
                if not np.isfinite(hard_loss):
                    raise DivergenceError(f"non-finite hard-batch loss at step {t}")
                params = sgd_step(params, g, step_lr)
                row["hard_loss"] = hard_loss
            if log is not None:
                log.rows.append(row)
            t += 1
    return params


def save_checkpoint(params: MlpParams, path, extra: dict | None = None) -> Path:
    """Write ``params`` as an uncompressed ``.npz`` archive.

    Members: ``meta`` (UTF-8 JSON bytes: format, version, spec, seed, extra)
    and ``W0, b0, W1, b1, ...`` as C-ordered float64 arrays.
    """
    path = Path(path)
    meta = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
            "spec": params.spec.to_dict(), "seed": params.seed, "extra": extra or {}}
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{k}"] = np.ascontiguousarray(w, dtype="<f8")
        arrays[f"b{k}"] = np.ascontiguousarray(b, dtype="<f8")
    buf = io.BytesIO()
    # fixed member timestamps keep the archive byte-identical across saves
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            member = io.BytesIO()
            np.lib.format.write_array(member, arr, allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)),
                        member.getvalue())
    path.write_bytes(buf.getvalue())
    return path


def load_checkpoint(path, with_meta: bool = False):
    from .errors import FormatError

    with np.load(Path(path), allow_pickle=False) as z:
        if "meta" not in z.files:
            raise FormatError("checkpoint has no meta record", field="meta")
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise FormatError(f"unknown checkpoint format {meta.get('format')!r}", field="format")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {meta.get('version')}",
                              field="version")
        spec = MlpSpec.from_dict(meta["spec"])
        ws = tuple(z[f"W{k}"].astype(float) for k in range(spec.n_layers))
        bs = tuple(z[f"b{k}"].astype(float) for k in range(spec.n_layers))
    params = MlpParams(spec, ws, bs, meta.get("seed"))
    return (params, meta) if with_meta else params


__all__: Sequence[str] = [
    "Hidden", "Output", "InitScheme", "MlpSpec", "MlpParams", "Gradients", "Batch",
    "ForwardPass", "init_random", "forward", "predict", "accuracy", "softmax", "loss_xent",
    "xent_objective", "linear_objective", "backward", "grad_params", "grad_input",
    "sgd_step", "feature_network", "train_sgd", "TrainLog", "save_checkpoint",
    "load_checkpoint",
]
