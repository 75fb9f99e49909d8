# -*- coding: utf-8 -*-
import os

import numpy as np
import pytest

from ddvi_lab import trainer as trainer_module
from ddvi_lab.checkpoint import load as load_checkpoint
from ddvi_lab.config import parse_config
from ddvi_lab.data_io import Dataset, load_dataset
from ddvi_lab.exceptions import ContractViolation, NonFiniteLossError
from ddvi_lab.metrics import EvalReport
from ddvi_lab.objectives import LossBreakdown
from ddvi_lab.stats import read_metrics_log
from ddvi_lab.trainer import Trainer, split_for, train


def read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def test_run_writes_its_files(tiny_config, tmp_path):
    out = str(tmp_path / "run")
    report, trainer = train(tiny_config, out)
    assert sorted(os.listdir(out)) == ["checkpoint-0001.ckpt", "checkpoint-0002.ckpt", "config.txt", "final.ckpt",
                                       "metrics.tsv", "report.txt"]
    assert EvalReport.from_text(read(os.path.join(out, "report.txt"))) == report
    rows = read_metrics_log(os.path.join(out, "metrics.tsv"))
    # 96 training items in batches of 32, two epochs, one line per step
    assert [r["step"] for r in rows] == list(range(1, 7))
    assert all(r["wallclock_ms"] == 0 for r in rows)
    assert trainer.step == 6
    state = load_checkpoint(os.path.join(out, "final.ckpt"))
    np.testing.assert_array_equal(state["decoder.out.bias"], trainer.model.decoder.out.bias.data)


def test_config_dump_reparses(tiny_config, tmp_path):
    out = str(tmp_path / "run")
    train(tiny_config.replace(epochs=0), out)
    assert parse_config(read(os.path.join(out, "config.txt"))) == tiny_config.replace(epochs=0)


def test_zero_epochs(tiny_config, tmp_path):
    out = str(tmp_path / "run")
    report, trainer = train(tiny_config.replace(epochs=0), out)
    assert sorted(os.listdir(out)) == ["checkpoint-0000.ckpt", "config.txt", "report.txt"]
    assert trainer.step == 0
    assert report.n_eval == len(trainer.test_set)


def test_runs_are_deterministic(tiny_config, tmp_path):
    a, _ = train(tiny_config, str(tmp_path / "a"))
    b, _ = train(tiny_config, str(tmp_path / "b"))
    assert a == b
    assert read(str(tmp_path / "a" / "metrics.tsv")) == read(str(tmp_path / "b" / "metrics.tsv"))
    with open(str(tmp_path / "a" / "final.ckpt"), "rb") as fa, open(str(tmp_path / "b" / "final.ckpt"), "rb") as fb:
        assert fa.read() == fb.read()


def test_log_every_keeps_the_last_step(make_config, tmp_path):
    config = make_config({"train.log_every": 4, "train.checkpoint_every": 0})
    out = str(tmp_path / "run")
    train(config, out)
    assert [r["step"] for r in read_metrics_log(os.path.join(out, "metrics.tsv"))] == [4, 6]
    assert "checkpoint-0001.ckpt" not in os.listdir(out)


def test_pretraining_runs_for_structured_priors(make_config, tmp_path):
    config = make_config({"train.pretrain_epochs": 2})
    trainer = Trainer(config, load_dataset(config), str(tmp_path))
    before = trainer.model.eps_net.state_dict()
    losses = trainer.pretrain()
    assert len(losses) == 2
    after = trainer.model.eps_net.state_dict()
    assert any(not np.array_equal(before[k], after[k]) for k in before)


def test_no_pretraining_for_the_baseline(make_config, tmp_path):
    config = make_config({"train.pretrain_epochs": 2}, profile="aevb")
    trainer = Trainer(config, load_dataset(config), str(tmp_path))
    assert trainer.pretrain() == []


def test_non_finite_loss_stops_the_run(tiny_config, tmp_path, monkeypatch):
    calls = []

    def exploding(x, labels, model, config, seed, optimizers, epoch=0):
        calls.append(len(x))
        value = float("nan") if len(calls) == 2 else -1.0
        return LossBreakdown.make(value, -1.0, 0.0, 1.0, 1.0)

    monkeypatch.setattr(trainer_module, "train_step", exploding)
    out = str(tmp_path / "run")
    with pytest.raises(NonFiniteLossError) as info:
        train(tiny_config, out)
    assert (info.value.epoch, info.value.batch_index) == (1, 1)
    dump = read(os.path.join(out, "nonfinite-batch.txt"))
    assert "batch_index=1" in dump
    assert "rec=nan" in dump
    assert "final.ckpt" not in os.listdir(out)


def test_semisup_hides_most_labels(make_config, tmp_path):
    config = make_config({"data.label_fraction": 0.25}, profile="semisup")
    trainer = Trainer(config, load_dataset(config), str(tmp_path))
    visible = trainer.visible_labels
    assert len(visible) == len(trainer.train_set)
    assert (visible >= 0).sum() == int(round(0.25 * len(visible)))
    np.testing.assert_array_equal(visible[visible >= 0], trainer.train_set.labels[visible >= 0])


def test_semisup_needs_labels(make_config, tmp_path):
    config = make_config(profile="semisup")
    with pytest.raises(ContractViolation, match="labeled"):
        Trainer(config, Dataset(np.random.default_rng(0).uniform(size=(40, 6))), str(tmp_path))


def test_semisup_run(make_config, tmp_path):
    config = make_config({"train.epochs": 1}, profile="semisup")
    report, _ = train(config, str(tmp_path / "run"))
    assert np.isfinite(report.elbo)
    assert report.knn_acc is not None


def test_split_is_shared(tiny_config):
    dataset = load_dataset(tiny_config)
    train_a, test_a = split_for(tiny_config, dataset)
    train_b, test_b = split_for(tiny_config, dataset)
    np.testing.assert_array_equal(test_a.items, test_b.items)
    assert len(train_a) + len(test_a) == len(dataset)
