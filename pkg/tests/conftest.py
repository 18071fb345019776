import os
import time
from pathlib import Path

import pytest

from pointwise_lab.datasets import DATA_ENV, dataset_files

REPO = Path(__file__).resolve().parents[1]
_runs: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = []


def data_root():
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else REPO / "data"


def have_dataset(name: str) -> bool:
    try:
        return all(p.exists() for s in ("train", "test") for p in dataset_files(name, s, data_root()))
    except (ValueError, FileNotFoundError):
        return False


def need_dataset(name: str):
    if not have_dataset(name):
        pytest.skip(f"{name} IDX files not found under {data_root()} (run scripts/fetch_data.py)")


@pytest.fixture(scope="session")
def desk_runs():
    """Trains each dataset's reference / hard-batch pair once per session."""
    from pointwise_lab.datasets import load_named
    from pointwise_lab.experiments import AdvTrainConfig, attack_curves, default_epsilons, train_pair
    from pointwise_lab.mlp import accuracy

    def get(name: str) -> dict:
        if name not in _runs:
            need_dataset(name)
            train = load_named(name, "train", data_root())
            test = load_named(name, "test", data_root())
            cfg = AdvTrainConfig(dataset=name)
            t0 = time.perf_counter()
            ref, adv, ref_log, adv_log, n_pool, n_sub = train_pair(cfg, train)
            t_train = time.perf_counter() - t0
            curves = attack_curves(ref, adv, test.images, test.labels, "l2",
                                   default_epsilons("l2"), cfg.seed)
            _runs[name] = {
                "cfg": cfg, "train": train, "test": test, "ref": ref, "adv": adv,
                "ref_log": ref_log, "adv_log": adv_log, "n_pool": n_pool, "n_sub": n_sub,
                "ref_acc": accuracy(ref, test.images, test.labels),
                "adv_acc": accuracy(adv, test.images, test.labels),
                "curves": curves, "train_seconds": t_train,
                "total_seconds": time.perf_counter() - t0,
            }
        return _runs[name]
    return get


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        item.config._criteria.append((str(mark.args[0]), mark.args[1], status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = getattr(config, "_criteria", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in rows:
        line = f"criterion {number:<4s} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
