# -*- coding: utf-8 -*-
import os

import pytest

from ddvi_lab.config import parse_config

# Desk-scale sizes shared by the tests that build whole models.
TINY = {
    "data.n": 120,
    "data.dim": 6,
    "prior.kde_points": 200,
    "model.hidden": 8,
    "model.time_hidden": 8,
    "model.time_layers": 1,
    "diffusion.steps": 3,
    "train.epochs": 2,
    "train.batch_size": 32,
    "train.lr": 1e-3,
    "train.log_every": 1,
    "train.log_wallclock": False,
    "train.checkpoint_every": 1,
    "eval.n_samples": 50,
    "eval.knn_k": 5,
}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DDVI_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; set DDVI_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def make_config():
    def make(extra=None, profile=None):
        return parse_config("", overrides=dict(TINY, **(extra or {})), profile=profile)
    return make


@pytest.fixture
def tiny_config(make_config):
    return make_config()
