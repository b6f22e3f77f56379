import numpy as np
import pytest

from mflab import config, harness
from mflab.data import Dataset
from mflab.model import HyperParams, Ensemble


@pytest.fixture
def small_hp():
    return HyperParams(alpha=3.0, lam=0.7, sigma_u=1.2, sigma_theta=0.8,
                       eta=1e-3, d=3, m=12, n=5, seed=42, activation="tanh")


@pytest.fixture
def small_problem(small_hp):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((small_hp.n, small_hp.d))
    x /= np.maximum(1.0, np.linalg.norm(x, axis=1, keepdims=True) * 1.01)
    y = rng.choice([-1.0, 1.0], size=small_hp.n)
    ds = Dataset(x=x, y=y)
    thetas = rng.standard_normal((small_hp.m, small_hp.d))
    us = rng.standard_normal(small_hp.m)
    return small_hp, ds, Ensemble(thetas=thetas, us=us)


def make_config(**overrides):
    """Default config with nested overrides, e.g. hyper={'m': 64}."""
    raw = config.default_config(overrides.pop("kind", "train")).to_dict()
    for key, val in overrides.items():
        if isinstance(val, dict):
            raw[key].update(val)
        else:
            raw[key] = val
    d = raw["hyper"]["d"]
    if "teacher" not in overrides and len(raw["teacher"]["mean_theta"]) != d:
        raw["teacher"]["mean_theta"] = [0.5] + [0.0] * (d - 1)
    return config.from_dict(raw)
