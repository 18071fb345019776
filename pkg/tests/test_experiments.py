"""Checks on the desk-scale MNIST pair; skipped when the IDX files are absent."""
import numpy as np

from pointwise_lab.adversarial import AttackSpec, feature_gap_table
from pointwise_lab.mlp import accuracy, load_checkpoint, save_checkpoint


def test_clean_accuracy_and_logs(desk_runs):
    run = desk_runs("mnist")
    assert run["ref_acc"] > 0.92 and run["adv_acc"] > 0.90
    assert np.all(np.isfinite(run["adv_log"].losses()))


def test_zero_radius_is_clean_accuracy(desk_runs):
    run = desk_runs("mnist")
    c = run["curves"]
    assert c["direct_reference"].at(0.0) == run["ref_acc"]
    assert c["direct_adv"].at(0.0) == run["adv_acc"]


def test_direct_curves_mostly_decreasing(desk_runs):
    for r in desk_runs("mnist")["curves"].values():
        assert np.all(np.diff(r.accuracy) <= 0.02)
        assert r.accuracy[-1] < 0.1


def test_checkpoint_reload_preserves_accuracy(desk_runs, tmp_path):
    run = desk_runs("mnist")
    path = save_checkpoint(run["adv"], tmp_path / "adv.npz")
    again = load_checkpoint(path)
    assert accuracy(again, run["test"].images, run["test"].labels) == run["adv_acc"]


def test_feature_gap_has_a_fragile_feature(desk_runs):
    run = desk_runs("mnist")
    test = run["test"]
    table = feature_gap_table(run["ref"], test.images, test.labels, (3, 7), AttackSpec("l2", 1.0))
    assert len(table.gap) == 128
    np.testing.assert_allclose(table.gap, table.clean_corr - table.adv_corr)
    assert np.max(table.gap) > 0
