"""Point sets on [0, 1] and solvers for optimal / hard training points."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, LearnerError
from .poly import MarginClassifier1D, chebyshev_matrix, fit_hinge_svm

FD_STEP = 1e-6
DEDUP_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Strictly increasing points inside [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float).ravel()
        if p.size == 0:
            raise DomainError("grid must not be empty")
        if not np.all(np.isfinite(p)) or p[0] < 0.0 or p[-1] > 1.0:
            raise DomainError("grid points must lie in [0, 1]")
        if np.any(np.diff(p) <= 0.0):
            raise DomainError("grid points must be strictly increasing")
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.points, dtype=dtype)


@dataclass(frozen=True, eq=False)
class LabeledSet1D:
    grid: Grid1D
    labels: np.ndarray

    def __post_init__(self):
        y = np.array(self.labels, dtype=int).ravel()
        if y.size != len(self.grid):
            raise DomainError(f"{len(self.grid)} points but {y.size} labels")
        if not np.all(np.isin(y, (-1, 1))):
            raise DomainError("labels must be -1 or +1")
        y.flags.writeable = False
        object.__setattr__(self, "labels", y)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @classmethod
    def from_labeler(cls, grid: Grid1D, labeler=None) -> LabeledSet1D:
        labeler = nn_label if labeler is None else labeler
        return cls(grid, labeler(grid.points))


@dataclass(frozen=True)
class HypothesisSample:
    """A finite list of functions on [0, 1] with optional probability weights."""

    hypotheses: tuple
    weights: np.ndarray | None = None

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        if not hyps:
            raise DomainError("hypothesis sample must be non-empty")
        object.__setattr__(self, "hypotheses", hyps)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != (len(hyps),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise DomainError("weights must be a probability vector over the hypotheses")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.hypotheses)

    @property
    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weights

    @classmethod
    def chebyshev_basis(cls, n: int) -> HypothesisSample:
        """Uniform sample over ``T*_0 .. T*_n``."""
        return cls(tuple(_ChebyshevBasisFunction(i) for i in range(n + 1)))


@dataclass(frozen=True)
class _ChebyshevBasisFunction:
    index: int

    def __call__(self, x):
        return chebyshev_matrix(self.index, np.atleast_1d(x))[:, self.index].reshape(np.shape(x))


def _check_count(m: int) -> None:
    if m < 2:
        raise DomainError(f"grid needs at least 2 points, got {m}")


def equispaced_grid(m: int) -> Grid1D:
    _check_count(m)
    return Grid1D(np.arange(m) / (m - 1))


def chebyshev_grid(m: int) -> Grid1D:
    """Chebyshev-Lobatto points on [0, 1], endpoints included.

    Written with a sine so the set is exactly symmetric about 0.5 and the
    endpoints come out as exact 0 and 1.
    """
    _check_count(m)
    k = np.arange(m)
    return Grid1D(0.5 - 0.5 * np.sin(np.pi * (m - 1 - 2 * k) / (2 * (m - 1))))


def chebyshev_nodes(n: int) -> Grid1D:
    """The ``n`` roots of ``T*_n``, ascending."""
    if n < 1:
        raise DomainError(f"degree must be >= 1, got {n}")
    k = np.arange(n)
    # ascending form of (1 + cos((2k+1) pi / 2n)) / 2
    return Grid1D(0.5 - 0.5 * np.sin(np.pi * (n - 1 - 2 * k) / (2 * n)))


def nn_label(x):
    """Nearest-neighbour label w.r.t. ``{(0, -1), (1, +1)}``; ties at 0.5 go to +1."""
    out = np.where(np.asarray(x) >= 0.5, 1, -1)
    return int(out) if out.ndim == 0 else out


def hard_density_chebyshev(n: int, x):
    """Mean of ``max(0, 1 - T*_i(x)^2)`` over ``i = 0..n``."""
    scalar = np.ndim(x) == 0
    T = chebyshev_matrix(n, x)
    out = np.maximum(0.0, 1.0 - T**2).mean(axis=1)
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def expected_hinge_objective(h_sample: HypothesisSample, X) -> float:
    x = np.asarray(X, dtype=float)
    per_h = [np.maximum(0.0, 1.0 - np.asarray(h(x), dtype=float) ** 2).sum()
             for h in h_sample.hypotheses]
    return float(np.dot(h_sample.probabilities, per_h))


def _vectorized(objective):
    def f(x):
        try:
            # scalar-only callables may squeeze a size-1 array through float()
            with warnings.catch_warnings():
                warnings.simplefilter("error", DeprecationWarning)
                out = np.asarray(objective(x), dtype=float)
            if out.shape == x.shape:
                return out
        except (TypeError, ValueError, DeprecationWarning):
            pass
        return np.array([float(objective(v)) for v in x])
    return f


@dataclass(frozen=True, eq=False)
class HardPoints:
    """Result of ``find_hard_points``.

    ``grid`` holds the selected points together with the boundary {0, 1};
    ``interior`` the selected points only. ``shortfall`` is set when fewer
    than ``m`` strict local maxima were found.
    """

    grid: Grid1D
    interior: np.ndarray
    values: np.ndarray
    shortfall: bool
    n_maxima: int = 0
    candidates: np.ndarray = field(default_factory=lambda: np.empty(0))


def _fd_grad(f, x, h=FD_STEP):
    lo = np.clip(x - h, 0.0, 1.0)
    hi = np.clip(x + h, 0.0, 1.0)
    return (f(hi) - f(lo)) / (hi - lo)


def _dedup(xs: np.ndarray, tol: float) -> np.ndarray:
    xs = np.sort(xs)
    keep = [xs[0]]
    for v in xs[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    return np.array(keep)


def find_hard_points(objective: Callable, m: int, restarts: int = 200, steps: int = 2000,
                     step_size: float = 1e-3, seed: int = 0, tol: float = DEDUP_TOL) -> HardPoints:
    """Multi-start projected gradient ascent of a 1-D objective on [0, 1].

    Every start keeps its own step length: it grows by 1.2x after an
    improving move and halves after a rejected one, so starts settle at
    local maxima without a tuned step. Gradients are central differences.
    Converged points are merged within ``tol``; the ``m`` highest strict
    local maxima are kept and the boundary {0, 1} is always added.
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    f = _vectorized(objective)
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, 1.0, restarts))
    fx = f(x)
    eta = np.full_like(x, step_size)
    for _ in range(steps):
        g = _fd_grad(f, x)
        cand = np.clip(x + eta * g, 0.0, 1.0)
        fc = f(cand)
        ok = fc > fx
        x = np.where(ok, cand, x)
        fx = np.where(ok, fc, fx)
        eta = np.where(ok, eta * 1.2, eta * 0.5)
        if np.all(eta < 1e-14):
            break

    pts = _dedup(x, tol)
    vals = f(pts)
    probe = 10 * tol
    left = f(np.clip(pts - probe, 0.0, 1.0))
    right = f(np.clip(pts + probe, 0.0, 1.0))
    strict = ((vals > left) | (pts <= 0.0)) & ((vals > right) | (pts >= 1.0))

    order = lambda idx: idx[np.argsort(-vals[idx], kind="stable")]
    maxima = order(np.flatnonzero(strict))
    others = order(np.flatnonzero(~strict))
    chosen = maxima[:m]
    shortfall = maxima.size < m
    if shortfall:
        chosen = np.concatenate([chosen, others[: m - chosen.size]])
    interior = np.sort(pts[chosen])
    full = np.union1d(interior, [0.0, 1.0])
    full = _dedup(full, tol * 0.1)
    return HardPoints(Grid1D(full), interior, f(interior), bool(shortfall),
                      int(maxima.size), pts)


def optimal_points_objective_oracle(X, h_sample: HypothesisSample,
                                    learner: Callable[[LabeledSet1D], Callable],
                                    fd_step: float = FD_STEP) -> float:
    """Brute-force value of the optimal-training-points objective at ``X``.

    For every hypothesis ``h``: label ``X`` by ``sign(h)`` (zero -> +1), fit
    ``learner`` on that labeling, and sum ``|d/dx (h_hat - h)|`` over ``X``
    by central differences (one-sided at 0 and 1). The sums are averaged with
    the sample's weights. Only meant for small ``X`` and small samples.
    """
    grid = X if isinstance(X, Grid1D) else Grid1D(X)
    x = grid.points
    lo = np.clip(x - fd_step, 0.0, 1.0)
    hi = np.clip(x + fd_step, 0.0, 1.0)
    totals = []
    for k, h in enumerate(h_sample.hypotheses):
        labels = np.where(np.asarray(h(x), dtype=float) >= 0.0, 1, -1)
        try:
            h_hat = learner(LabeledSet1D(grid, labels))
        except Exception as exc:
            raise LearnerError(f"learner failed on hypothesis {k}: {exc}", k) from exc
        err = lambda t: np.asarray(h_hat(t), dtype=float) - np.asarray(h(t), dtype=float)
        slope = (err(hi) - err(lo)) / (hi - lo)
        totals.append(np.abs(slope).sum())
    return float(np.dot(h_sample.probabilities, totals))


def hinge_learner(feature_map, **fit_kwargs) -> Callable[[LabeledSet1D], Callable]:
    """Learner for the oracle: ``fit_hinge_svm``, or a constant classifier on one-class labelings."""
    def learn(points: LabeledSet1D):
        y = points.labels
        if np.all(y == y[0]):
            return MarginClassifier1D(feature_map, np.zeros(feature_map.dim), float(y[0]))
        return fit_hinge_svm(points, feature_map, **fit_kwargs)
    return learn


def local_maxima(f: Callable, n_grid: int = 1_000_001, refine: bool = True,
                 lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Interior local maxima of ``f`` by a dense scan, then golden-section refinement.

    Independent of ``find_hard_points``; used as its oracle.
    """
    xs = np.linspace(lo, hi, n_grid)
    v = np.asarray(f(xs), dtype=float)
    idx = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    if not refine:
        return xs[idx]
    out = []
    for i in idx:
        res = minimize_scalar(lambda t: -float(np.asarray(f(np.array([t])))[0]),
                              bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                              options={"xatol": 1e-13})
        out.append(res.x)
    return np.array(out)


__all__: Sequence[str] = [
    "Grid1D", "LabeledSet1D", "HypothesisSample", "HardPoints", "equispaced_grid",
    "chebyshev_grid", "chebyshev_nodes", "nn_label", "hard_density_chebyshev",
    "expected_hinge_objective", "find_hard_points", "optimal_points_objective_oracle",
    "hinge_learner", "local_maxima",
]
