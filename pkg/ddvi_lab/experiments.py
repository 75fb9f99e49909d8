# -*- coding: utf-8 -*-
"""Scaled-down directional reproductions.

Each experiment trains its arms over a few seeds and compares mean metrics;
an experiment passes when the expected ordering holds. Runs write into
``<out>/<experiment>/<arm>-seed<k>/`` like ordinary training runs.
"""
import math
import os
from collections import OrderedDict, namedtuple

import numpy as np

from . import defaults, mob_log
from .autodiff import as_tensor
from .config import parse_config
from .data_io import make_synthetic
from .diffusion import DiffusionPosterior, NoiseSchedule, reverse_sample
from .metrics import cluster_scores
from .priors import MixturePrior
from .trainer import Trainer
from .utils import derive_seed, rng

ExperimentResult = namedtuple("ExperimentResult", ["name", "metric", "values", "means", "passed", "detail"])

SEEDS = (0, 1, 2)

# Desk-scale pinwheel task: synthetic 32-dim lift, n=4000, 40 epochs.
PINWHEEL_TASK = {
    "data.kind": "synthetic",
    "data.n": 4000,
    "data.dim": 32,
    "prior.kind": "pinwheel",
    "prior.kde_points": 2000,
    "model.hidden": 64,
    "model.time_hidden": 64,
    "model.time_layers": 3,
    "diffusion.steps": 10,
    "train.epochs": 40,
    "train.lr": 1e-3,
    "train.checkpoint_every": 0,
    "train.log_wallclock": False,
    "eval.n_samples": 1000,
}


def run_arm(name, overrides, seed, out_dir, profile=None, dataset=None):
    """Train one arm for one seed; returns its EvalReport."""
    overrides = dict(overrides, **{"train.seed": seed, "model.init_seed": seed})
    config = parse_config("", overrides=overrides, profile=profile)
    run_dir = os.path.join(out_dir, "%s-seed%d" % (name, seed))
    trainer = Trainer.from_config(config, run_dir) if dataset is None else Trainer(config, dataset, run_dir)
    return trainer.run()


def _collect(arms, metric, out_dir, seeds, datasets=None):
    values = OrderedDict()
    for arm, (profile, overrides) in arms.items():
        values[arm] = []
        for seed in seeds:
            dataset = datasets(seed) if datasets is not None else None
            report = run_arm(arm, overrides, seed, out_dir, profile, dataset)
            values[arm].append(getattr(report, metric))
    means = OrderedDict((arm, float(np.mean(v))) for arm, v in values.items())
    return values, means


def _log(result):
    mob_log.info(f"experiment {result.name}: {result.metric} means {dict(result.means)} "
                 f"-> {'pass' if result.passed else 'FAIL'} ({result.detail})").track_id(result.name).commit()
    return result


def pinwheel_vs_aevb(out_dir, seeds=SEEDS, task=None):
    """DDVI beats the Gaussian-posterior baseline on latent NLL (lower is better)."""
    task = dict(PINWHEEL_TASK, **(task or {}))
    arms = OrderedDict([
        ("ddvi", ("unsup", task)),
        ("aevb", ("aevb", task)),
    ])
    values, means = _collect(arms, "latent_nll", os.path.join(out_dir, "pinwheel"), seeds)
    passed = means["ddvi"] < means["aevb"]
    return _log(ExperimentResult("pinwheel", "latent_nll", values, means, passed, "ddvi < aevb"))


def sleep_ablation(out_dir, seeds=SEEDS, task=None):
    """Removing the sleep term (m=0, beta_diff=0) makes latent NLL worse."""
    task = dict(PINWHEEL_TASK, **(task or {}))
    arms = OrderedDict([
        ("ddvi", ("unsup", task)),
        ("no-sleep", ("unsup", dict(task, **{"train.sleep_iterations": 0, "train.beta_diff": 0.0}))),
    ])
    values, means = _collect(arms, "latent_nll", os.path.join(out_dir, "sleep-ablation"), seeds)
    passed = means["ddvi"] < means["no-sleep"]
    return _log(ExperimentResult("sleep-ablation", "latent_nll", values, means, passed, "ddvi < no-sleep"))


def semisup_knn(out_dir, seeds=SEEDS, task=None, label_fraction=0.2):
    """With 20% labels the latents separate the pinwheel arms far above chance."""
    task = dict(PINWHEEL_TASK, **(task or {}))
    semi = dict(task, **{"data.label_fraction": label_fraction, "train.batch_size": 128})
    arms = OrderedDict([
        ("semisup", ("semisup", semi)),
        ("unsup", ("unsup", task)),
    ])
    values, means = _collect(arms, "knn_acc", os.path.join(out_dir, "semisup"), seeds)
    chance = 1.0 / defaults.N_PARTITIONS
    passed = means["semisup"] >= 5.0 * chance and means["semisup"] > means["unsup"]
    return _log(ExperimentResult("semisup", "knn_acc", values, means, passed,
                                 "semisup >= %g and semisup > unsup" % (5.0 * chance)))


def three_class_dataset(seed, n=3000, dim=32):
    """Three well-separated Gaussian clusters pushed through the synthetic lift."""
    source = MixturePrior(dim=2, components=3, sigma=0.2, radius=2.0)
    return make_synthetic(source, n, derive_seed(seed, 3), dim=dim, head="identity", lift_seed=seed)


def random_nmi(labels, k, seed):
    assignments = rng(seed, 99).integers(0, k, size=len(labels))
    return cluster_scores(assignments, labels)[2]


def mixture_clustering(out_dir, seeds=SEEDS, components=6, epochs=40):
    """Nearest-mean assignments under a 6-component mixture prior recover 3 classes."""
    task = {
        "prior.kind": "mixture",
        "prior.components": components,
        "data.head": "identity",
        "model.hidden": 64,
        "model.time_hidden": 64,
        "model.time_layers": 3,
        "diffusion.steps": 10,
        "train.epochs": epochs,
        "train.lr": 1e-3,
        "train.checkpoint_every": 0,
        "train.log_wallclock": False,
        "eval.n_samples": 500,
    }
    arms = OrderedDict([("ddvi", ("cluster", task))])
    datasets = {}

    def dataset_for(seed):
        if seed not in datasets:
            datasets[seed] = three_class_dataset(seed)
        return datasets[seed]

    values, means = _collect(arms, "nmi", os.path.join(out_dir, "clustering"), seeds, dataset_for)
    baseline = [random_nmi(dataset_for(seed).labels, components, seed) for seed in seeds]
    values["random"] = baseline
    means["random"] = float(np.mean(baseline))
    passed = means["ddvi"] >= 0.5 and means["ddvi"] > means["random"] + 0.3
    return _log(ExperimentResult("clustering", "nmi", values, means, passed, "ddvi >= 0.5 and > random + 0.3"))


class GaussianScoreNet(object):
    """Exact noise predictor for a Gaussian target N(mean, var * I) under ``schedule``.

    eps(y, t) = sqrt(1 - abar_t) (y - sqrt(abar_t) mean) / (abar_t var + 1 - abar_t)
    """

    def __init__(self, mean, var, schedule):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.var = float(var)
        self.schedule = schedule

    def predict_noise(self, y_t, x_feat, t, labels=None):
        ab = self.schedule.alpha_bars[t]
        y = y_t.data if hasattr(y_t, "data") else np.asarray(y_t, dtype=np.float64)
        eps = math.sqrt(1.0 - ab) * (y - math.sqrt(ab) * self.mean) / (ab * self.var + 1.0 - ab)
        return as_tensor(eps)


class FixedGaussianEncoder(object):
    """q(y_T | x) that ignores x: the exact forward marginal of the target at step T."""

    def __init__(self, mean, var, schedule):
        ab = schedule.alpha_bars[schedule.steps]
        self.latent_dim = len(mean)
        self.mu = math.sqrt(ab) * np.asarray(mean, dtype=np.float64)
        self.logvar = math.log(ab * var + 1.0 - ab)

    def encode(self, x):
        n = len(x)
        return as_tensor(np.tile(self.mu, (n, 1))), as_tensor(np.full((n, self.latent_dim), self.logvar))

    def features(self, x):
        return as_tensor(x)


def sampler_fidelity(n=100000, mean=(1.0, -0.5), var=1.0, steps=defaults.DIFFUSION_STEPS, seed=0,
                     sigma_mode="beta"):
    """Reverse samples under the analytic noise predictor match the Gaussian target.

    Returns ``(sample mean, sample covariance, passed)``; the tolerances are
    0.02 on the mean and 0.05 per covariance entry.
    """
    schedule = NoiseSchedule.linear(steps)
    mean = np.asarray(mean, dtype=np.float64)
    posterior = DiffusionPosterior(FixedGaussianEncoder(mean, var, schedule), GaussianScoreNet(mean, var, schedule),
                                   schedule, sigma_mode=sigma_mode)
    z, _ = reverse_sample(np.zeros((n, 1)), posterior, seed)
    z = z.data
    sample_mean = z.mean(axis=0)
    sample_cov = np.cov(z, rowvar=False)
    target_cov = var * np.eye(len(mean))
    passed = bool(np.all(np.abs(sample_mean - mean) < 0.02) and np.all(np.abs(sample_cov - target_cov) < 0.05))
    result = ExperimentResult("sampler-fidelity", "moments",
                              {"mean": sample_mean.tolist(), "cov": sample_cov.tolist()},
                              {"max_mean_err": float(np.max(np.abs(sample_mean - mean))),
                               "max_cov_err": float(np.max(np.abs(sample_cov - target_cov)))},
                              passed, "mean within 0.02, covariance within 0.05")
    _log(result)
    return sample_mean, sample_cov, passed


EXPERIMENTS = OrderedDict([
    ("pinwheel", pinwheel_vs_aevb),
    ("sleep-ablation", sleep_ablation),
    ("semisup", semisup_knn),
    ("clustering", mixture_clustering),
])


def reproduce(out_dir, names=None, seeds=SEEDS):
    """Run the named experiments (all by default) and write ``reproduce.txt``."""
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    results = []
    _, _, fidelity = sampler_fidelity()
    lines.append("sampler-fidelity\tmoments\t%s" % ("pass" if fidelity else "FAIL"))
    for name in names or EXPERIMENTS:
        if name not in EXPERIMENTS:
            raise ValueError("unknown experiment %r (choose from %s)" % (name, ", ".join(EXPERIMENTS)))
        result = EXPERIMENTS[name](out_dir, seeds)
        results.append(result)
        means = " ".join("%s=%r" % (arm, v) for arm, v in result.means.items())
        lines.append("%s\t%s\t%s\t%s" % (result.name, result.metric, means, "pass" if result.passed else "FAIL"))
    with open(os.path.join(out_dir, "reproduce.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return fidelity, results
