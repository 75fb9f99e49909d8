# -*- coding: utf-8 -*-
import os
import time

import numpy as np

from . import defaults, mob_log
from .autodiff import Adam
from .data_io import label_mask, load_dataset, split_dataset
from .exceptions import ContractViolation, NonFiniteLossError
from .metrics import evaluate
from .models import DdviModel
from .objectives import Optimizers, pretrain_step, train_step
from .stats import MetricsLog
from .utils import derive_seed, get_run_id, rng


def split_for(config, dataset):
    """The (train, test) split every command of a run agrees on."""
    return split_dataset(dataset, config.test_fraction, derive_seed(config.seed, 5))


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


class Trainer(object):
    """Epoch loop of one run.

    Settings
    --------
    train.epochs : int
        Passes over the training split; 0 writes the initial checkpoint and the report only.
    train.pretrain_epochs : int (default: -1)
        Unconditional denoising epochs before the main loop; -1 picks a tenth
        of the run for structured priors and none otherwise.
    train.checkpoint_every : int
        Epochs between ``checkpoint-NNNN.ckpt`` files (0 disables them).
    train.log_every : int
        Steps between lines of the metrics log.
    data.label_fraction : float
        Share of training items whose labels are visible in semi-supervised runs.
    """

    def __init__(self, config, dataset, out_dir, model=None):
        """Initialize the trainer.

        Parameters
        ----------
        config : RunConfig
            Resolved run configuration.
        dataset : Dataset
            The full dataset; it is split into train and test here.
        out_dir : str
            Directory for checkpoints, the metrics log and the report.
        model : DdviModel, optional
            Built from ``config`` when omitted.
        """
        self.config = config
        self.out_dir = out_dir
        self.run_id = get_run_id(config)
        self.train_set, self.test_set = split_for(config, dataset)
        self.model = model if model is not None else DdviModel.from_config(config, dataset.dim)
        self.optimizers = Optimizers.from_config(self.model, config)
        self.metrics = MetricsLog.from_config(config, out_dir)
        self.step = 0
        self.last_elapsed_ms = 0.0
        self.visible_labels = self._visible_labels()

    @classmethod
    def from_config(cls, config, out_dir):
        return cls(config, load_dataset(config), out_dir)

    def _visible_labels(self):
        if self.config.mode != "semisup":
            return None
        labels = self.train_set.labels
        if labels is None:
            raise ContractViolation("semi-supervised training needs a labeled dataset")
        mask = label_mask(len(labels), self.config.label_fraction, derive_seed(self.config.seed, 6))
        return np.where(mask, labels, -1)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def log(self, msg):
        mob_log.info(msg).track_id(self.run_id).commit()

    def save_checkpoint(self, epoch):
        name = defaults.CHECKPOINT_NAME % {"epoch": epoch}
        self.model.save(self.path(name))
        self.log(f"checkpoint {name} written")
        return self.path(name)

    def batches(self, n, seed):
        order = rng(seed).permutation(n)
        size = self.config.batch_size
        return [order[start:start + size] for start in range(0, n, size)]

    def pretrain(self):
        epochs = self.config.pretrain if self.model.diffusion else 0
        if not epochs:
            return []
        self.log(f"pretraining stage: {epochs} unconditional epoch(s)")
        optimizer = Adam(self.model.eps_net.parameters(), lr=self.config.lr)
        n_batches = max(1, -(-len(self.train_set) // self.config.batch_size))
        losses = []
        for epoch in range(epochs):
            epoch_losses = [pretrain_step(self.model, self.config, derive_seed(self.config.seed, 100, epoch, i),
                                          optimizer)
                            for i in range(n_batches)]
            losses.append(float(np.mean(epoch_losses)))
            self.log(f"pretrain epoch {epoch + 1}/{epochs}: denoising loss {losses[-1]!r}")
        self.log("pretraining stage done, switching to the main loop")
        return losses

    def _dump_nonfinite(self, epoch, batch_index, rows, breakdown):
        lines = ["epoch=%d" % epoch, "batch_index=%d" % batch_index, "step=%d" % self.step,
                 "items=%s" % ",".join(str(int(r)) for r in rows)]
        lines += ["%s=%r" % (k, v) for k, v in breakdown.as_dict().items()]
        write_text(self.path(defaults.NONFINITE_DUMP_NAME), "\n".join(lines) + "\n")

    def train_epoch(self, epoch):
        """One pass over the training split (``epoch`` counts from 1)."""
        config = self.config
        x_all = self.train_set.items
        last = None
        for batch_index, rows in enumerate(self.batches(len(x_all), derive_seed(config.seed, 200, epoch))):
            self.step += 1
            labels = None if self.visible_labels is None else self.visible_labels[rows]
            started = time.perf_counter()
            breakdown = train_step(x_all[rows], labels, self.model, config, derive_seed(config.seed, 300, self.step),
                                   self.optimizers, epoch=epoch - 1)
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            self.last_elapsed_ms = elapsed_ms
            if not breakdown.is_finite():
                self._dump_nonfinite(epoch, batch_index, rows, breakdown)
                mob_log.error(f"non-finite loss at epoch {epoch}, batch {batch_index}: {breakdown}") \
                    .track_id(self.run_id).commit()
                raise NonFiniteLossError(epoch, batch_index, breakdown)
            if self.step % config.log_every == 0:
                self.metrics.record(self.step, breakdown, elapsed_ms)
                self.log(f"step {self.step}: rec={breakdown.rec!r} reg={breakdown.reg!r} "
                         f"diff={breakdown.diff!r} total={breakdown.total!r}")
            last = breakdown
        return last

    def finish(self, epoch):
        report = evaluate(self.model, self.config, self.test_set, epoch=epoch, run_id=self.run_id)
        write_text(self.path(defaults.REPORT_NAME), report.to_text())
        self.log(f"final report: {report.as_dict()}")
        return report

    def run(self):
        """Train and evaluate; returns the final EvalReport."""
        config = self.config
        os.makedirs(self.out_dir, exist_ok=True)
        write_text(self.path(defaults.CONFIG_DUMP_NAME), config.to_text())
        self.log(f"run start: mode={config.mode} prior={config.prior_kind} "
                 f"n_train={len(self.train_set)} n_test={len(self.test_set)}")
        for key, source in sorted(config.provenance.items()):
            if source != "default":
                self.log(f"config {key}={config.get(key)!r} ({source})")
        if config.epochs == 0:
            self.save_checkpoint(0)
            return self.finish(0)
        self.pretrain()
        with self.metrics.open():
            last = None
            for epoch in range(1, config.epochs + 1):
                last = self.train_epoch(epoch) or last
                if config.checkpoint_every and epoch % config.checkpoint_every == 0:
                    self.save_checkpoint(epoch)
            if last is not None and self.metrics.get_value("last_step") != self.step:
                self.metrics.record(self.step, last, self.last_elapsed_ms)
        self.model.save(self.path(defaults.FINAL_CHECKPOINT_NAME))
        self.log(f"final checkpoint written after {self.step} steps")
        return self.finish(config.epochs)


def train(config, out_dir, dataset=None):
    trainer = Trainer(config, dataset if dataset is not None else load_dataset(config), out_dir)
    return trainer.run(), trainer
