"""Polynomial feature maps on [0, 1] and max-margin classifiers built on them.

Two bases are supported: Bernstein polynomials and shifted Chebyshev
polynomials of the first kind, ``T*_i(x) = T_i(2x - 1)``. On the two-point
training set ``{(0, -1), (1, +1)}`` the hard-margin classifier has a closed
form in both bases (``eval_f`` and ``eval_g``); ``fit_hinge_svm`` trains the
same kind of classifier on arbitrary labeled point sets.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateError, DomainError, LabelCoverageError

if TYPE_CHECKING:
    from .points import LabeledSet1D


class Basis(str, enum.Enum):
    BERNSTEIN = "bernstein"
    SHIFTED_CHEBYSHEV = "chebyshev"


def _unit_interval(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("x must lie in [0, 1]")
    return x


def _binomials(n: int) -> np.ndarray:
    # iterative multiply-divide keeps every intermediate a float; exact-ish to n ~ 1000
    c = np.empty(n + 1)
    c[0] = 1.0
    for i in range(1, n + 1):
        c[i] = c[i - 1] * (n - i + 1) / i
    return c


def bernstein(i: int, n: int, x):
    """``C(n, i) x^i (1 - x)^(n - i)``; ``x`` may be a scalar or an array."""
    if n < 0 or not 0 <= i <= n:
        raise DomainError(f"need 0 <= i <= n, got i={i}, n={n}")
    x = _unit_interval(x)
    out = _binomials(n)[i] * x**i * (1.0 - x) ** (n - i)
    return out if out.ndim else float(out)


def bernstein_matrix(n: int, x) -> np.ndarray:
    """All ``n + 1`` Bernstein basis values, shape ``(len(x), n + 1)``."""
    x = np.atleast_1d(_unit_interval(x)).ravel()
    i = np.arange(n + 1)
    return _binomials(n) * x[:, None] ** i * (1.0 - x[:, None]) ** (n - i)


def chebyshev_matrix(n: int, x) -> np.ndarray:
    """``T*_0 .. T*_n`` at ``x`` via the three-term recurrence, shape ``(len(x), n + 1)``."""
    if n < 0:
        raise DomainError(f"degree must be non-negative, got {n}")
    x = np.atleast_1d(_unit_interval(x)).ravel()
    u = 2.0 * x - 1.0
    out = np.empty((x.size, n + 1))
    out[:, 0] = 1.0
    if n >= 1:
        out[:, 1] = u
    for i in range(1, n):
        out[:, i + 1] = 2.0 * u * out[:, i] - out[:, i - 1]
    return out


def shifted_chebyshev(i: int, x):
    """``T_i(2x - 1)`` for ``x`` in [0, 1]."""
    if i < 0:
        raise DomainError(f"index must be non-negative, got {i}")
    scalar = np.ndim(x) == 0
    out = chebyshev_matrix(i, x)[:, i]
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def _check_degree(n: int) -> None:
    if n < 1:
        raise DegenerateError(f"degree must be >= 1, got {n}")


def eval_f(n: int, x):
    """Closed-form Bernstein max-margin classifier ``x^n - (1 - x)^n``."""
    _check_degree(n)
    x = _unit_interval(x)
    out = x**n - (1.0 - x) ** n
    return out if out.ndim else float(out)


def eval_g(n: int, x):
    """Closed-form Chebyshev classifier ``2/(n+1) * sum of the odd T*_k, k <= n``."""
    _check_degree(n)
    scalar = np.ndim(x) == 0
    T = chebyshev_matrix(n, x)
    out = 2.0 / (n + 1) * T[:, 1::2].sum(axis=1)
    return float(out[0]) if scalar else out.reshape(np.shape(x))


@dataclass(frozen=True)
class PolyFeatureMap:
    basis: Basis
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.degree < 0:
            raise DomainError(f"degree must be non-negative, got {self.degree}")

    @property
    def dim(self) -> int:
        return self.degree + 1

    def __call__(self, x) -> np.ndarray:
        if self.basis is Basis.BERNSTEIN:
            return bernstein_matrix(self.degree, x)
        return chebyshev_matrix(self.degree, x)


@dataclass(frozen=True, eq=False)
class MarginClassifier1D:
    """Linear classifier ``h(x) = <w, phi(x)> + b`` in polynomial feature space.

    ``converged`` and ``objective`` are filled in by trained fits; the
    analytic two-point fit leaves them at their defaults.
    """

    feature_map: PolyFeatureMap
    weights: np.ndarray
    bias: float = 0.0
    converged: bool = True
    objective: float | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.feature_map.dim,):
            raise DegenerateError(
                f"expected {self.feature_map.dim} weights, got shape {w.shape}")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise DegenerateError("weights and bias must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def decision_function(self, x):
        scalar = np.ndim(x) == 0
        out = self.feature_map(x) @ self.weights + self.bias
        return float(out[0]) if scalar else out.reshape(np.shape(x))

    __call__ = decision_function

    def predict(self, x):
        """Labels in {-1, +1}; a zero decision value maps to +1."""
        return np.where(np.asarray(self.decision_function(x)) >= 0.0, 1, -1)


def fit_two_point_max_margin(feature_map: PolyFeatureMap) -> MarginClassifier1D:
    """Hard-margin classifier for ``{(0, -1), (1, +1)}`` in closed form.

    With ``p = phi(1)`` and ``q = phi(0)`` the margin is exactly one at both
    points for ``w = 2 (p - q) / |p - q|^2`` and ``b = -<w, p + q> / 2``.
    Both supported bases give ``b = 0``.
    """
    p, q = feature_map(np.array([1.0, 0.0]))
    d = p - q
    dd = float(d @ d)
    if dd == 0.0:
        raise DegenerateError("phi(0) == phi(1): no separating direction")
    w = 2.0 * d / dd
    return MarginClassifier1D(feature_map, w, -0.5 * float(w @ (p + q)))


def _hinge_objective(X, y, w, b, reg):
    margins = y * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + reg * (w @ w))


def fit_hinge_svm(points: LabeledSet1D, feature_map: PolyFeatureMap, reg: float = 1e-6,
                  iters: int = 20000, seed: int = 0, restarts: int = 1,
                  step_scale: float = 1.0, tol: float = 1e-8) -> MarginClassifier1D:
    """Mean hinge loss plus ``reg * |w|^2`` by full-batch subgradient descent.

    Steps are ``step_scale / sqrt(t)``, capped at ``0.5 / reg``. The first restart starts from zero,
    the others from small seeded Gaussian weights; the best iterate over all
    restarts is returned. ``converged`` is False when the best objective still
    moved by more than ``tol`` during the final quarter of the iterations.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    x = np.asarray(points.x, dtype=float)
    y = np.asarray(points.labels, dtype=float)
    if x.size < 2 or not (np.any(y > 0) and np.any(y < 0)):
        raise LabelCoverageError("need at least two points and both labels")
    X = feature_map(x)
    m = len(y)
    rng = np.random.default_rng(seed)
    best = (np.inf, None, 0.0, True)
    late = int(0.75 * iters)
    cap = 0.5 / reg  # keeps the ridge part of each step contractive
    for r in range(max(1, restarts)):
        w = np.zeros(X.shape[1]) if r == 0 else rng.normal(0.0, 0.1, X.shape[1])
        b = 0.0
        run_best, run_w, run_b = np.inf, w.copy(), b
        at_late = np.inf
        for t in range(1, iters + 1):
            margins = y * (X @ w + b)
            active = margins < 1.0
            obj = float(np.mean(np.maximum(0.0, 1.0 - margins)) + reg * (w @ w))
            if obj < run_best:
                run_best, run_w, run_b = obj, w.copy(), b
            if t == late:
                at_late = run_best
            ya = y[active]
            gw = -(ya @ X[active]) / m + 2.0 * reg * w
            gb = -ya.sum() / m
            eta = min(step_scale / np.sqrt(t), cap)
            w = w - eta * gw
            b = b - eta * gb
        final = _hinge_objective(X, y, w, b, reg)
        if final < run_best:
            run_best, run_w, run_b = final, w, b
        settled = not (at_late - run_best > tol)
        if run_best < best[0]:
            best = (run_best, run_w, run_b, settled)
    return MarginClassifier1D(feature_map, best[1], best[2], converged=best[3],
                              objective=best[0])
