# -*- coding: utf-8 -*-
import numpy as np
import pytest

from ddvi_lab import experiments
from ddvi_lab.diffusion import NoiseSchedule
from ddvi_lab.experiments import (FixedGaussianEncoder, GaussianScoreNet, mixture_clustering, pinwheel_vs_aevb,
                                  random_nmi, reproduce, sampler_fidelity, semisup_knn, sleep_ablation,
                                  three_class_dataset)


def test_sampler_fidelity():
    mean, cov, passed = sampler_fidelity()
    assert passed
    np.testing.assert_allclose(mean, [1.0, -0.5], atol=0.02)
    np.testing.assert_allclose(cov, np.eye(2), atol=0.05)


def test_score_net_is_the_exact_noise():
    schedule = NoiseSchedule.linear(5)
    net = GaussianScoreNet([0.5], 2.0, schedule)
    ab = schedule.alpha_bars[3]
    y = np.array([[1.2]])
    expected = np.sqrt(1 - ab) * (1.2 - np.sqrt(ab) * 0.5) / (ab * 2.0 + 1 - ab)
    assert net.predict_noise(y, None, 3).data[0, 0] == pytest.approx(expected)


def test_fixed_encoder_matches_the_forward_marginal():
    schedule = NoiseSchedule.linear(4)
    enc = FixedGaussianEncoder([1.0, 2.0], 0.5, schedule)
    mu, logvar = enc.encode(np.zeros((3, 1)))
    ab = schedule.alpha_bars[4]
    np.testing.assert_allclose(mu.data, np.tile(np.sqrt(ab) * np.array([1.0, 2.0]), (3, 1)))
    np.testing.assert_allclose(np.exp(logvar.data), np.full((3, 2), ab * 0.5 + 1 - ab))


def test_three_class_dataset():
    dataset = three_class_dataset(0, n=300, dim=8)
    assert dataset.items.shape == (300, 8)
    assert set(np.unique(dataset.labels)) == {0, 1, 2}
    assert dataset.kind == "continuous"


def test_random_nmi_is_small():
    labels = np.repeat([0, 1, 2], 200)
    assert random_nmi(labels, 6, 0) < 0.05


def test_reproduce_rejects_unknown_names(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "sampler_fidelity", lambda: (None, None, True))
    with pytest.raises(ValueError, match="unknown experiment"):
        reproduce(str(tmp_path), ["nope"])


def test_reproduce_writes_a_summary(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "sampler_fidelity", lambda: (None, None, True))
    fake = experiments.ExperimentResult("pinwheel", "latent_nll", {"ddvi": [1.0], "aevb": [2.0]},
                                        {"ddvi": 1.0, "aevb": 2.0}, True, "ddvi < aevb")
    monkeypatch.setitem(experiments.EXPERIMENTS, "pinwheel", lambda out_dir, seeds: fake)
    fidelity, results = reproduce(str(tmp_path), ["pinwheel"], seeds=(0,))
    assert fidelity and results == [fake]
    with open(str(tmp_path / "reproduce.txt"), encoding="utf-8") as f:
        assert f.read() == "sampler-fidelity\tmoments\tpass\npinwheel\tlatent_nll\tddvi=1.0 aevb=2.0\tpass\n"


def test_smoke_arm_runs(tmp_path):
    task = {"data.n": 200, "data.dim": 8, "prior.kde_points": 200, "model.hidden": 8, "model.time_hidden": 8,
            "model.time_layers": 1, "diffusion.steps": 2, "train.epochs": 1, "eval.n_samples": 50,
            "eval.knn_k": 5}
    result = pinwheel_vs_aevb(str(tmp_path), seeds=(0,), task=task)
    assert set(result.means) == {"ddvi", "aevb"}
    assert all(np.isfinite(v) for v in result.means.values())
    assert (tmp_path / "pinwheel" / "ddvi-seed0" / "report.txt").exists()


@pytest.mark.slow
def test_ddvi_beats_the_baseline_on_pinwheel(tmp_path):
    assert pinwheel_vs_aevb(str(tmp_path)).passed


@pytest.mark.slow
def test_sleep_term_helps(tmp_path):
    assert sleep_ablation(str(tmp_path)).passed


@pytest.mark.slow
def test_semisupervised_latents_separate_classes(tmp_path):
    assert semisup_knn(str(tmp_path)).passed


@pytest.mark.slow
def test_mixture_prior_recovers_clusters(tmp_path):
    assert mixture_clustering(str(tmp_path)).passed
