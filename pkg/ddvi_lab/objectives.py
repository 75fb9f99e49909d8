# -*- coding: utf-8 -*-
"""Training objectives.

Breakdown values are bound values (higher is better): ``rec`` is the
pixel-averaged log-likelihood, ``reg`` the prior-regularization term and
``diff`` the sleep bound. The optimizers minimize the negated wake terms plus
the weighted noise-prediction surrogate.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import defaults
from .autodiff import Adam, Tape, as_tensor, concat, exp, log_softmax, reparam_sample
from .diffusion import diffusion_loss, fantasy, gaussian_entropy, prior_reg_term, sleep_bound
from .exceptions import ContractViolation
from .priors import MixturePrior, prior_log_density, sample_partition
from .utils import derive_seed, rng


@dataclass
class LossBreakdown(object):
    rec: float
    reg: float
    diff: float
    total: float
    beta_reg: float
    beta_diff: float
    diff_surrogate: float = 0.0

    @classmethod
    def make(cls, rec, reg, diff, beta_reg, beta_diff, diff_surrogate=0.0):
        rec, reg, diff = float(rec), float(reg), float(diff)
        return cls(rec, reg, diff, rec + beta_reg * reg + beta_diff * diff, float(beta_reg), float(beta_diff),
                   float(diff_surrogate))

    def is_finite(self):
        return all(math.isfinite(v) for v in (self.rec, self.reg, self.diff, self.total, self.diff_surrogate))

    def as_dict(self):
        return asdict(self)


class Optimizers(object):
    """The wake optimizer over theta and phi, and the sleep optimizer over phi only."""

    def __init__(self, model, lr):
        self.wake = Adam(model.parameters(), lr=lr)
        self.sleep = Adam(model.phi_params(), lr=lr) if model.diffusion else None

    @classmethod
    def from_config(cls, model, config):
        return cls(model, config.lr)


def kl_weight_at(config, epoch):
    if config.kl_schedule == "linear":
        return config.kl_weight * min(1.0, epoch / float(max(1, config.epochs)))
    return config.kl_weight


def effective_beta_reg(config, epoch):
    return config.beta_reg * kl_weight_at(config, epoch)


def reconstruction_log_lik(x, z, decoder):
    """Per-item log p(x|z), averaged over pixels."""
    x = np.asarray(x.data if hasattr(x, "data") else x, dtype=np.float64)
    if decoder.head == "sigmoid":
        if x.size and (x.min() < 0.0 or x.max() > 1.0):
            raise ContractViolation("Bernoulli reconstruction needs x in [0, 1]")
        logits = decoder.logits(z)
        ll = x * logits - logits.softplus()
    else:
        mean = decoder.decode(z)
        ll = (mean - x).square() * -0.5 - 0.5 * defaults.LOG_2PI
    return ll.mean(axis=1)


def reconstruction_loss(x, z, decoder):
    """L_rec: batch and pixel mean of log p(x|z)."""
    return reconstruction_log_lik(x, z, decoder).mean()


def gaussian_kl(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, I)) per item."""
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    return (exp(logvar) + mu.square() - 1.0 - logvar).sum(axis=1) * 0.5


def wake_terms(x, model, config, seed, epoch, labels=None, log_prior=None):
    """Per-item (rec, reg) Tensors of the diffusion ELBO, over ``n_mc`` shared draws."""
    reg, zs = prior_reg_term(x, model.posterior, model.prior, config.n_mc, seed, kde=model.kde,
                             labels=labels, log_prior=log_prior, return_z=True)
    rec = sum(reconstruction_log_lik(x, z, model.decoder) for z in zs) * (1.0 / len(zs))
    return rec, reg


def sleep_phase(config, model, seed, optimizer=None, iterations=None):
    """Sleep updates of phi on fantasy data; theta is never touched.

    Iteration i draws z ~ p(z) with ``derive_seed(seed, i, 0)``, the diffusion
    targets with ``derive_seed(seed, i, 1)`` and (for sampled fantasies) the
    x draw with ``derive_seed(seed, i, 2)``. Returns the per-iteration losses,
    each measured before its update.
    """
    m = config.sleep_iterations if iterations is None else iterations
    if m < 0:
        raise ContractViolation("sleep iterations must be >= 0, got %d" % m)
    opt = optimizer if optimizer is not None else Adam(model.phi_params(), lr=config.lr)
    losses = []
    for i in range(m):
        z, _ = model.prior.sample(config.batch_size, derive_seed(seed, i, 0))
        x_hat = fantasy(model.decoder, z, derive_seed(seed, i, 2), sample=config.fantasy == "sample")
        with Tape() as tape:
            loss = diffusion_loss(z, model.posterior.x_features(x_hat), model.posterior, derive_seed(seed, i, 1))
        opt.step(tape.gradients(loss, opt.params))
        losses.append(float(loss.data))
    return losses


def pretrain_step(model, config, seed, optimizer):
    """One unconditional denoising step on prior samples (x_feat zeroed); returns the loss."""
    z, _ = model.prior.sample(config.batch_size, derive_seed(seed, 0))
    with Tape() as tape:
        loss = diffusion_loss(z, None, model.posterior, derive_seed(seed, 1))
    optimizer.step(tape.gradients(loss, optimizer.params))
    return float(loss.data)


def simplified_sleep_loss(x, model, prior, seed, labels=None):
    """Latent sleep term: z ~ p(z) (or p(z|l)), the noise net conditioned on the real batch.

    Uses the seeds of the first sleep_phase iteration.
    """
    n = len(x)
    if labels is None:
        z, _ = prior.sample(n, derive_seed(seed, 0, 0))
    else:
        z = sample_partition(prior, labels, derive_seed(seed, 0, 0))
    return diffusion_loss(z, model.posterior.x_features(x), model.posterior, derive_seed(seed, 0, 1), labels=labels)


def ddvi_objective(x, model, config, seed, epoch):
    """Differentiable objective of one unsupervised batch plus its (rec, reg, surrogate) values."""
    beta_reg = effective_beta_reg(config, epoch)
    rec, reg = wake_terms(x, model, config, derive_seed(seed, 1), epoch)
    rec, reg = rec.mean(), reg.mean()
    objective = -(rec + beta_reg * reg)
    surrogate = 0.0
    if config.sleep_mode == "simplified" and config.beta_diff > 0:
        sleep = simplified_sleep_loss(x, model, model.prior, derive_seed(seed, 2))
        objective = objective + config.beta_diff * sleep
        surrogate = float(sleep.data)
    return objective, float(rec.data), float(reg.data), surrogate


def _bound(model, config, n, seed, use_labels=False):
    return sleep_bound(model.posterior, model.decoder, model.prior, n, seed, sleep_entropy=model.sleep_entropy,
                       use_labels=use_labels)


def ddvi_step(x, model, config, seed, optimizers, epoch=0):
    """One DDVI training step on a batch; the breakdown is measured before the updates."""
    with Tape() as tape:
        objective, rec, reg, surrogate = ddvi_objective(x, model, config, seed, epoch)
    grads = tape.gradients(objective, optimizers.wake.params)
    diff = _bound(model, config, len(x), derive_seed(seed, 4))
    optimizers.wake.step(grads)
    if config.sleep_mode == "alternating":
        losses = sleep_phase(config, model, derive_seed(seed, 3), optimizers.sleep)
        surrogate = float(np.mean(losses)) if losses else 0.0
    return LossBreakdown.make(rec, reg, diff, effective_beta_reg(config, epoch), config.beta_diff, surrogate)


def unlabeled_objective(class_logits, losses):
    """sum_l q(l|x) L(x, l) + KL(q(l|x) || uniform), per item.

    ``losses`` holds one column per label.
    """
    logq = log_softmax(as_tensor(class_logits), axis=1)
    q = exp(logq)
    n_labels = logq.shape[1]
    kl = (q * (logq + math.log(n_labels))).sum(axis=1)
    return (q * losses).sum(axis=1) + kl


def _check_labels(labels, n_labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and labels.max() >= n_labels:
        raise ContractViolation("label id %d outside 0..%d" % (labels.max(), n_labels - 1))
    if labels.size and labels.min() < -1:
        raise ContractViolation("label id %d is not a class (use -1 for unlabeled)" % labels.min())
    return labels


def semi_supervised_parts(x, labels, model, config, seed, epoch=0):
    """Terms of the semi-supervised loss. ``labels`` uses -1 for unlabeled items."""
    x = np.asarray(x, dtype=np.float64)
    n_labels = model.prior.n_partitions
    labels = _check_labels(labels, n_labels)
    beta_reg = effective_beta_reg(config, epoch)
    n = len(x)

    def label_terms(rows, label):
        lab = np.full(len(rows), label)
        rec, reg = wake_terms(x[rows], model, config, derive_seed(seed, 10, label), epoch, labels=lab,
                              log_prior=model.partition_log_prior(label))
        return rec, reg

    total = 0.0
    rec_sum, reg_sum = 0.0, 0.0
    for label in np.unique(labels[labels >= 0]):
        rows = np.flatnonzero(labels == label)
        rec, reg = label_terms(rows, label)
        total = total + (-(rec + beta_reg * reg)).sum()
        rec_sum += float(rec.data.sum())
        reg_sum += float(reg.data.sum())

    unl = np.flatnonzero(labels < 0)
    if len(unl):
        recs, regs = [], []
        for label in range(n_labels):
            rec, reg = label_terms(unl, label)
            recs.append(rec.reshape(-1, 1))
            regs.append(reg.reshape(-1, 1))
        rec_cols, reg_cols = concat(recs, axis=1), concat(regs, axis=1)
        logits = model.encoder.class_logits(x[unl])
        total = total + unlabeled_objective(logits, -(rec_cols + beta_reg * reg_cols)).sum()
        q = np.exp(log_softmax(logits.data, axis=1).data)
        rec_sum += float(np.sum(q * rec_cols.data))
        reg_sum += float(np.sum(q * reg_cols.data))

    bound = total * (1.0 / n)
    classifier = 0.0
    lab_rows = np.flatnonzero(labels >= 0)
    if len(lab_rows):
        logq = log_softmax(model.encoder.class_logits(x[lab_rows]), axis=1)
        onehot = np.zeros((len(lab_rows), n_labels))
        onehot[np.arange(len(lab_rows)), labels[lab_rows]] = 1.0
        classifier = -(logq * onehot).sum(axis=1).mean()

    sleep = 0.0
    if config.beta_diff > 0:
        sleep_labels = labels.copy()
        missing = sleep_labels < 0
        sleep_labels[missing] = rng(seed, 20).integers(0, n_labels, size=int(missing.sum()))
        sleep = simplified_sleep_loss(x, model, model.prior, derive_seed(seed, 3), labels=sleep_labels)
    return {
        "bound": bound,
        "classifier": classifier,
        "sleep": sleep,
        "rec": rec_sum / n,
        "reg": reg_sum / n,
    }


def _combine(parts, config):
    return parts["bound"] + config.classifier_weight * parts["classifier"] + config.beta_diff * parts["sleep"]


def semi_supervised_loss(x, labels, model, config, seed, epoch=0):
    """Labeled items contribute L_semi(x, l), unlabeled ones the q(l|x)-weighted sum plus
    KL to the uniform label prior; plus alpha times the classifier cross-entropy and
    the weighted latent sleep term."""
    return as_tensor(_combine(semi_supervised_parts(x, labels, model, config, seed, epoch), config))


def _value(v):
    return float(v.data) if hasattr(v, "data") else float(v)


def semisup_step(x, labels, model, config, seed, optimizers, epoch=0):
    with Tape() as tape:
        parts = semi_supervised_parts(x, labels, model, config, seed, epoch)
        objective = as_tensor(_combine(parts, config))
    grads = tape.gradients(objective, optimizers.wake.params)
    diff = _bound(model, config, len(x), derive_seed(seed, 4), use_labels=True)
    optimizers.wake.step(grads)
    return LossBreakdown.make(parts["rec"], parts["reg"], diff, effective_beta_reg(config, epoch), config.beta_diff,
                              _value(parts["sleep"]))


def aevb_terms(x, model, config, seed, epoch):
    """Baseline terms for a diagonal Gaussian posterior: (rec scalar, reg per item).

    The standard normal prior uses the closed-form -KL; any other prior uses
    ``prior_weight * E_q[log p(z)] + H(q)`` with the KDE for structured priors.
    """
    mu, logvar = model.encoder.encode(x)
    gen = rng(seed)
    zs = [reparam_sample(mu, logvar, gen.standard_normal(mu.shape)) for _ in range(config.n_mc)]
    rec = sum(reconstruction_log_lik(x, z, model.decoder) for z in zs) * (1.0 / len(zs))
    if model.prior.kind == "gaussian":
        reg = -gaussian_kl(mu, logvar)
    else:
        log_p = sum(prior_log_density(model.prior, z, model.kde) for z in zs) * (1.0 / len(zs))
        reg = config.prior_weight * log_p + gaussian_entropy(mu.shape[1], logvar.sum(axis=1))
    return rec.mean(), reg


def aevb_step(x, model, config, seed, optimizers, epoch=0):
    beta_reg = effective_beta_reg(config, epoch)
    with Tape() as tape:
        rec, reg = aevb_terms(x, model, config, seed, epoch)
        reg = reg.mean()
        objective = -(rec + beta_reg * reg)
    optimizers.wake.step(tape.gradients(objective, optimizers.wake.params))
    return LossBreakdown.make(rec.data, reg.data, 0.0, beta_reg, 0.0)


def train_step(x, labels, model, config, seed, optimizers, epoch=0):
    """Dispatch one training step by mode."""
    if config.mode == "aevb-baseline":
        return aevb_step(x, model, config, seed, optimizers, epoch)
    if config.mode == "semisup":
        return semisup_step(x, labels, model, config, seed, optimizers, epoch)
    return ddvi_step(x, model, config, seed, optimizers, epoch)


def evaluate_breakdown(x, model, config, seed, epoch, n_mc=None):
    """The breakdown of a batch without any update (used for evaluation)."""
    if n_mc is not None and n_mc != config.n_mc:
        config = config.replace(n_mc=n_mc)
    beta_reg = effective_beta_reg(config, epoch)
    if config.mode == "aevb-baseline":
        rec, reg = aevb_terms(x, model, config, seed, epoch)
        return LossBreakdown.make(rec.data, reg.data.mean(), 0.0, beta_reg, 0.0)
    if config.mode == "semisup":
        parts = semi_supervised_parts(x, np.full(len(x), -1), model, config, seed, epoch)
        diff = _bound(model, config, len(x), derive_seed(seed, 4), use_labels=True)
        return LossBreakdown.make(parts["rec"], parts["reg"], diff, beta_reg, config.beta_diff, _value(parts["sleep"]))
    _, rec, reg, surrogate = ddvi_objective(x, model, config, seed, epoch)
    diff = _bound(model, config, len(x), derive_seed(seed, 4))
    return LossBreakdown.make(rec, reg, diff, beta_reg, config.beta_diff, surrogate)


def cluster_assign(z, mixture):
    """Index of the nearest mixture mean; ties go to the lowest index."""
    if not isinstance(mixture, MixturePrior):
        raise ContractViolation("cluster assignment needs a mixture prior, got %r" % getattr(mixture, "kind", mixture))
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        return int(mixture.nearest(z)[0])
    return mixture.nearest(z)
