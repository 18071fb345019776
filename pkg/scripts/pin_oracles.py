"""Recompute the numbers the test-suite pins, with independent methods where possible.

* local maxima of the n=10 hard density by dense scan, and their distance
  to the nearest root of T*_10
* dense-grid sign error of the degree-30 hinge classifier on both grids,
  plus an exact QP solution (cvxpy, optional) as a cross-check
* optimal-points oracle values on 12-point grids
* landscape statistics for the random 5-class network
"""
import numpy as np
from scipy.stats import spearmanr

from pointwise_lab.experiments import GridTrainConfig, LandscapeConfig, grid_train_errors, landscape_fields
from pointwise_lab.points import (HypothesisSample, LabeledSet1D, chebyshev_grid, chebyshev_nodes,
                                  equispaced_grid, hard_density_chebyshev, hinge_learner,
                                  local_maxima, nn_label, optimal_points_objective_oracle)
from pointwise_lab.poly import PolyFeatureMap, eval_f


def hard_density() -> None:
    peaks = local_maxima(lambda x: hard_density_chebyshev(10, x))
    nodes = chebyshev_nodes(10).points
    dist = np.abs(peaks[:, None] - nodes[None, :]).min(axis=1)
    print("density maxima:", np.array2string(peaks, precision=7))
    print("distance to nearest node: max", dist.max())


def grid_errors() -> None:
    cfg = GridTrainConfig(m_values=[20, 31, 40, 60, 100])
    for kind, m, clf, err in grid_train_errors(cfg):
        print(f"subgradient {kind:10s} m={m:3d} error={err:.5f} converged={clf.converged}")
    try:
        import cvxpy as cp
    except ImportError:
        return
    fm = PolyFeatureMap("chebyshev", 30)
    dense = np.linspace(0, 1, 10001)
    for kind, make in (("chebyshev", chebyshev_grid), ("equispaced", equispaced_grid)):
        pts = LabeledSet1D.from_labeler(make(40), nn_label)
        X, y = fm(pts.x), pts.labels.astype(float)
        w, b = cp.Variable(X.shape[1]), cp.Variable()
        obj = cp.mean(cp.pos(1 - cp.multiply(y, X @ w + b))) + 1e-6 * cp.sum_squares(w)
        cp.Problem(cp.Minimize(obj)).solve()
        pred = np.where(fm(dense) @ w.value + b.value >= 0, 1, -1)
        print(f"exact QP    {kind:10s} m= 40 error={np.mean(pred != nn_label(dense)):.5f}")


def oracle_values() -> None:
    learn = hinge_learner(PolyFeatureMap("chebyshev", 10), iters=2000)
    odd_f = HypothesisSample(tuple((lambda n: lambda x: eval_f(n, x))(n) for n in (1, 3, 5, 7, 9)))
    for label, sample in (("chebyshev basis", HypothesisSample.chebyshev_basis(10)),
                          ("odd f_n", odd_f)):
        c = optimal_points_objective_oracle(chebyshev_grid(12), sample, learn)
        e = optimal_points_objective_oracle(equispaced_grid(12), sample, learn)
        print(f"oracle {label:15s} lobatto={c:.3f} equispaced={e:.3f}")


def landscape() -> None:
    for seed in range(5):
        _, cls, adv, hard = landscape_fields(LandscapeConfig(seed=seed))
        print(f"landscape seed={seed} adv max={adv.max():.4f} "
              f"spearman={spearmanr(adv, hard).statistic:+.3f} classes={len(np.unique(cls))}")


if __name__ == "__main__":
    hard_density()
    grid_errors()
    oracle_values()
    landscape()
