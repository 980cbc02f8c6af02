import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--datasets-dir", default=str(Path(__file__).parents[1] / "data"),
                     help="directory holding the public power-system attack datasets")


@pytest.fixture
def datasets_dir(request):
    return Path(request.config.getoption("--datasets-dir"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record an acceptance verdict: ``criterion(key, passed, detail)``; ``passed=None`` means skipped."""
    def record(key, passed, detail=""):
        verdict = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_RESULTS[key] = (verdict, detail)
        print(f"{key}: {verdict}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key}: {verdict}  {detail}")


def unit_columns(rng, n, m):
    D = rng.standard_normal((n, m))
    return D / np.linalg.norm(D, axis=0)


def write_smoke_dataset(directory, seed=0):
    """4-feature, 3-class CSV pair: 100 labeled rows and 200 unlabeled rows."""
    rng = np.random.default_rng(seed)
    centers = np.array([[2.0, 0, 0, 0], [0, 2.0, 0, 0], [0, 0, 2.0, 0]])
    labels = rng.integers(0, 3, 300)
    X = centers[labels] + rng.normal(0, 0.5, (300, 4))
    head = "f0,f1,f2,f3"
    lab = Path(directory) / "labeled.csv"
    unl = Path(directory) / "unlabeled.csv"
    lab.write_text(head + ",class\n" + "".join(
        ",".join(f"{v:.17g}" for v in x) + f",c{y}\n" for x, y in zip(X[:100], labels[:100])))
    unl.write_text(head + "\n" + "".join(",".join(f"{v:.17g}" for v in x) + "\n" for x in X[100:]))
    return lab, unl


def smoke_config(directory, out, **overrides):
    from sshad.dictionary_learning import DictLearnConfig
    from sshad.pipeline import RunConfig
    from sshad.sparse_coding import OmpConfig
    from sshad.tree import HadConfig

    lab, unl = write_smoke_dataset(directory)
    kw = dict(labeled_path=str(lab), unlabeled_path=str(unl), sampling_ratios=[0.5, 1.0],
              dictionary=DictLearnConfig(m=8, k=2, tol=0.01, max_iter=20),
              omp=OmpConfig(2, 0.01), had=HadConfig(grace_period=20), folds=2, seed=7,
              output_dir=str(out), snapshot_every=10)
    kw.update(overrides)
    return RunConfig(**kw)
