"""Independent oracles shared by the test modules."""
import math
import struct

import numpy as np

from pointwise_lab.mlp import MlpParams, forward, loss_xent


def straight_line_forward(params: MlpParams, x):
    """Scalar-loop forward pass; no numpy linear algebra."""
    spec = params.spec
    rows = []
    for sample in np.atleast_2d(x):
        a = [float(v) for v in sample]
        for k, (w, b) in enumerate(zip(params.weights, params.biases)):
            z = [b[j] + sum(a[i] * w[i][j] for i in range(len(a))) for j in range(len(b))]
            if k < spec.n_layers - 1:
                if spec.hidden_activation.value == "tanh":
                    a = [math.tanh(v) for v in z]
                else:
                    a = [v if v > 0 else 0.0 for v in z]
            elif spec.output_activation.value == "softmax":
                top = max(z)
                e = [math.exp(v - top) for v in z]
                s = sum(e)
                a = [v / s for v in e]
            else:
                a = z
        rows.append(a)
    return np.array(rows)


def with_flat(params: MlpParams, flat) -> MlpParams:
    ws, bs, pos = [], [], 0
    for w, b in zip(params.weights, params.biases):
        ws.append(flat[pos:pos + w.size].reshape(w.shape))
        pos += w.size
        bs.append(flat[pos:pos + b.size].copy())
        pos += b.size
    return MlpParams(params.spec, tuple(ws), tuple(bs), params.seed)


def _pattern(params, x):
    return np.concatenate([(z > 0).ravel() for z in forward(params, x).preactivations[:-1]])


def param_grad_fd_check(params: MlpParams, x, y, analytic, h=1e-5, skip_kinks=False):
    """Max relative error of ``analytic`` (flat) against central differences.

    With ``skip_kinks`` a coordinate is dropped when either probe flips a
    ReLU on/off, since the derivative is undefined across the kink.
    """
    theta = params.flat()
    base = _pattern(params, x) if skip_kinks else None
    worst, used = 0.0, 0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        pp, pm = with_flat(params, tp), with_flat(params, tm)
        if skip_kinks and not (np.array_equal(_pattern(pp, x), base)
                               and np.array_equal(_pattern(pm, x), base)):
            continue
        fd = (loss_xent(forward(pp, x).output, y) - loss_xent(forward(pm, x).output, y)) / (2 * h)
        denom = max(abs(fd), abs(analytic[i]), 1e-7)
        worst = max(worst, abs(fd - analytic[i]) / denom)
        used += 1
    return worst, used


def input_grad_fd(f, x, h=1e-5):
    """Central-difference gradient of a per-row scalar function ``f`` w.r.t. each row."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = h
        g[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def write_idx(path, magic, dims, payload: bytes):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{len(dims)}I", *dims))
        fh.write(payload)


def write_toy_idx(folder, n=20, rows=4, cols=3, seed=0, prefix="train"):
    rng = np.random.default_rng(seed)
    pix = rng.integers(0, 256, (n, rows, cols), dtype=np.uint8)
    lab = (np.arange(n) % 10).astype(np.uint8)
    img = folder / f"{prefix}-images-idx3-ubyte"
    labp = folder / f"{prefix}-labels-idx1-ubyte"
    write_idx(img, 0x803, (n, rows, cols), pix.tobytes())
    write_idx(labp, 0x801, (n,), lab.tobytes())
    return img, labp, pix, lab
