import contextlib
import time

import numpy as np
import pytest

from embalance.store import LabeledEmbeddingSet

_ACCEPTANCE: list[str] = []
SESSION_START = time.perf_counter()


@contextlib.contextmanager
def criterion(number, description):
    """Record a PASS/FAIL line for an acceptance criterion, re-raising failures."""
    try:
        yield
    except BaseException:
        _ACCEPTANCE.append(f"FAIL  criterion {number}: {description}")
        raise
    _ACCEPTANCE.append(f"PASS  criterion {number}: {description}")


def pytest_collection_modifyitems(items):
    # the suite-duration check must observe every other test, so it runs last
    last = [i for i in items if i.get_closest_marker("runs_last")]
    items[:] = [i for i in items if i not in last] + last


def pytest_configure(config):
    config.addinivalue_line("markers", "runs_last: schedule after all other tests")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def random_set(rng, n=None, d=None, C=None, integer=False, float32=False):
    """Random labeled set with every class present."""
    C = C or int(rng.integers(2, 6))
    n = n or int(rng.integers(C + 2, 120))
    d = d or int(rng.integers(1, 9))
    labels = np.concatenate([np.arange(C), rng.integers(0, C, size=n - C)])
    rng.shuffle(labels)
    if integer:
        features = rng.integers(-3, 4, size=(n, d)).astype(float)
    else:
        features = rng.normal(size=(n, d)) * rng.uniform(0.5, 5)
    if float32:
        features = features.astype(np.float32).astype(np.float64)
    return LabeledEmbeddingSet(features, labels, C)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def two_blobs():
    """2-class, 2-d Gaussian fixture: 200 majority rows around (2, 0), 20 minority around (-2, 0)."""
    g = np.random.default_rng(11)
    major = g.normal(loc=(2.0, 0.0), scale=1.0, size=(200, 2))
    minor = g.normal(loc=(-2.0, 0.0), scale=1.0, size=(20, 2))
    return LabeledEmbeddingSet(np.vstack([major, minor]), np.repeat([0, 1], [200, 20]), 2)


FIXTURE_SEEDS = range(5)
FIXTURE_METHODS = ("none", "smote", "eos")


@pytest.fixture(scope="session")
def synthetic_runs(tmp_path_factory):
    """Pipeline reports on the 10-class synthetic fixture, keyed by method, one per seed.

    Each seed gets its own generated train/test pair; all runs share it.
    """
    from embalance.pipeline import PipelineConfig, SynthConfig, generate_synthetic, run_pipeline

    root = tmp_path_factory.mktemp("synthetic")
    start = time.perf_counter()
    runs = {m: [] for m in FIXTURE_METHODS}
    files = []
    for seed in FIXTURE_SEEDS:
        train, test = generate_synthetic(SynthConfig(seed=seed), root / f"seed{seed}")
        files.append((train, test))
        for method in FIXTURE_METHODS:
            runs[method].append(run_pipeline(PipelineConfig(str(train), str(test), method=method, seed=seed)))
    runs["files"] = files
    runs["seconds"] = time.perf_counter() - start
    return runs
