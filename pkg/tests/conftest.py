import numpy as np
import pytest

from exagree.data import generate_synthetic, split
from exagree.models import train_logistic


@pytest.fixture(scope="session")
def small_task():
    """400x5 synthetic dataset with a deterministic split."""
    ds = generate_synthetic(400, 5, np.array([2.0, 1.5, 1.0, 0.6, 0.3]),
                            noise_std=0.0, seed=7)
    sp = split(ds, 0.25, seed=1)
    return ds, sp


@pytest.fixture(scope="session")
def small_lr(small_task):
    ds, sp = small_task
    return train_logistic(ds, sp, lr=0.5, epochs=400, seed=0)


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """A fully completed pipeline run shared by CLI/service tests."""
    from exagree import pipeline as pl

    run_dir = tmp_path_factory.mktemp("runs") / "tiny"
    m = pl.stage_synth(run_dir, n=600, p=5, seed=3)
    pl.stage_train_ref(m, "logistic", epochs=400, seed=0)
    pl.stage_sample(m, epsilon=0.05, n_samples=120, seed=0)
    pl.stage_dman(m, lr=1e-3, epochs=1200, seed=0)
    pl.create_target(m, "t1", text="gauss_1 > gauss_0")
    pl.stage_search(m, "t1", heads=10, epochs=30, seed=0, ks=(0.25, 0.5))
    pl.stage_eval(m, "t1", ks=(0.25,))
    return m
