# -*- coding: utf-8 -*-
"""Forward noising process r(y|z) and the diffusion posterior q(y, z|x).

Naming follows the usual denoising-diffusion convention: ``beta_t`` is the
variance added at step t, ``alpha_t = 1 - beta_t`` and ``alpha_bar_t`` is the
running product, so

    r(y_t | y_{t-1}) = N(sqrt(alpha_t) y_{t-1}, beta_t I)
    r(y_t | z)       = N(sqrt(alpha_bar_t) z, (1 - alpha_bar_t) I)

The reverse chain starts from the encoder's q(y_T|x) and denoises y_T down to
y_0 = z with the noise-prediction network.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .autodiff import Tensor, as_tensor, reparam_sample
from .exceptions import ContractViolation
from .priors import prior_log_density
from .utils import derive_seed, rng


@dataclass
class NoiseSchedule(object):
    """Per-step coefficients, indexed by t = 0..T (index 0 is the identity step)."""

    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or len(betas) < 2:
            raise ContractViolation("schedule needs at least one step")
        if betas[0] != 0.0:
            raise ContractViolation("beta_0 must be 0")
        if np.any(betas[1:] <= 0.0) or np.any(betas[1:] >= 1.0):
            raise ContractViolation("every beta_t must lie in (0, 1)")
        self.betas = betas
        self.alphas = 1.0 - betas
        self.alpha_bars = np.cumprod(self.alphas)

    @classmethod
    def linear(cls, steps=defaults.DIFFUSION_STEPS, beta_start=defaults.BETA_START, beta_end=defaults.BETA_END):
        if steps < 1:
            raise ContractViolation("diffusion needs T >= 1, got %d" % steps)
        return cls(np.concatenate([[0.0], np.linspace(beta_start, beta_end, steps)]))

    @classmethod
    def from_config(cls, config):
        return cls.linear(config.steps, config.beta_start, config.beta_end)

    @property
    def steps(self):
        return len(self.betas) - 1

    def check_step(self, t, low=1):
        t = np.asarray(t)
        if t.size and (t.min() < low or t.max() > self.steps):
            raise ContractViolation("step index out of range %d..%d: %s" % (low, self.steps, t))

    def posterior_variances(self):
        """Variance of r(y_{t-1} | y_t, z); step 1 (exactly 0) is replaced by beta_1."""
        ab = self.alpha_bars
        out = np.zeros_like(self.betas)
        out[1:] = (1.0 - ab[:-1]) / (1.0 - ab[1:]) * self.betas[1:]
        out[1] = self.betas[1]
        return out

    def reverse_variances(self, sigma_mode=defaults.SIGMA_MODE):
        if sigma_mode == "beta":
            return self.betas.copy()
        if sigma_mode == "posterior":
            return self.posterior_variances()
        raise ContractViolation("unknown sigma mode %r" % sigma_mode)


def _coef(values, t, like):
    """Per-row coefficient column for a scalar or per-row step index."""
    c = np.asarray(values)[np.asarray(t)]
    if np.ndim(c) == 0:
        return float(c)
    return c.reshape(-1, *([1] * (np.ndim(like) - 1)))


def forward_marginal(z, t, noise, schedule):
    """y_t = sqrt(alpha_bar_t) z + sqrt(1 - alpha_bar_t) noise."""
    schedule.check_step(t, low=0)
    a = _coef(np.sqrt(schedule.alpha_bars), t, noise.data if isinstance(noise, Tensor) else noise)
    b = _coef(np.sqrt(1.0 - schedule.alpha_bars), t, noise.data if isinstance(noise, Tensor) else noise)
    return a * z + b * noise


def forward_step(y_prev, t, noise, schedule):
    """One kernel r(y_t | y_{t-1}) draw."""
    schedule.check_step(t)
    return math.sqrt(schedule.alphas[t]) * y_prev + math.sqrt(schedule.betas[t]) * noise


@dataclass
class Trajectory(object):
    """One reverse pass. ``states[t]`` is y_t for t = 0..T; ``states[0]`` is z."""

    states: list
    enc_mu: Tensor
    enc_logvar: Tensor
    variances: np.ndarray

    @property
    def z(self):
        return self.states[0]

    @property
    def steps(self):
        return len(self.states) - 1

    def trajectory(self):
        """y_T, ..., y_1."""
        return self.states[:0:-1]


class DiffusionPosterior(object):
    """q(y, z | x): encoder for q(y_T|x) plus the noise-prediction network.

    ``eps_net`` is anything with ``predict_noise(y_t, x_feat, t, labels=None)``.
    ``variances`` overrides the fixed reverse variances (index 0..T).
    """

    def __init__(self, encoder, eps_net, schedule, sigma_mode=defaults.SIGMA_MODE,
                 condition_on=defaults.CONDITION_ON, variances=None):
        self.encoder = encoder
        self.eps_net = eps_net
        self.schedule = schedule
        self.sigma_mode = sigma_mode
        self.condition_on = condition_on
        self.variances = schedule.reverse_variances(sigma_mode) if variances is None \
            else np.asarray(variances, dtype=np.float64)
        if len(self.variances) != schedule.steps + 1:
            raise ContractViolation("need %d reverse variances, got %d" % (schedule.steps + 1, len(self.variances)))

    @property
    def steps(self):
        return self.schedule.steps

    @property
    def latent_dim(self):
        return self.encoder.latent_dim

    def x_features(self, x):
        if self.condition_on == "features":
            return self.encoder.features(x)
        return as_tensor(x)

    def reverse_mean(self, y_t, t, x_feat, labels=None):
        eps_hat = self.eps_net.predict_noise(y_t, x_feat, t, labels)
        s = self.schedule
        coef = s.betas[t] / math.sqrt(1.0 - s.alpha_bars[t])
        return (y_t - coef * eps_hat) * (1.0 / math.sqrt(s.alphas[t]))


def reverse_sample(x, posterior, seed, labels=None, enc_noise=None, unconditional=False):
    """Run the reverse chain y_T -> ... -> y_0 = z for a batch of inputs.

    Returns ``(z, trajectory)``. Every draw is reparameterized, so under a tape
    the result is differentiable in the encoder and noise-network weights.
    """
    mu, logvar = posterior.encoder.encode(x)
    n, d = mu.shape
    gen = rng(seed)
    noise = gen.standard_normal((n, d)) if enc_noise is None else np.asarray(enc_noise, dtype=np.float64)
    y = reparam_sample(mu, logvar, noise)
    x_feat = None if unconditional else posterior.x_features(x)
    states = [None] * (posterior.steps + 1)
    states[posterior.steps] = y
    for t in range(posterior.steps, 0, -1):
        eta = gen.standard_normal((n, d))
        y = posterior.reverse_mean(y, t, x_feat, labels) + math.sqrt(posterior.variances[t]) * eta
        states[t - 1] = y
    traj = Trajectory(states, mu, logvar, posterior.variances)
    return traj.z, traj


def gaussian_entropy(d, logvar_sum):
    return 0.5 * d * (1.0 + defaults.LOG_2PI) + 0.5 * logvar_sum


def entropy_term(posterior, trajectory):
    """Entropy of q(y, z|x): q(y_T|x) plus the T fixed-variance reverse steps, per item."""
    d = trajectory.enc_mu.shape[1]
    reverse = sum(gaussian_entropy(d, d * math.log(trajectory.variances[t])) for t in range(1, trajectory.steps + 1))
    return gaussian_entropy(d, trajectory.enc_logvar.sum(axis=1)) + reverse


def forward_log_density(trajectory, schedule):
    """log r(y_1..y_T | z) = sum_t log N(y_t; sqrt(alpha_t) y_{t-1}, beta_t I), per item."""
    d = trajectory.enc_mu.shape[1]
    total = 0.0
    for t in range(1, trajectory.steps + 1):
        resid = trajectory.states[t] - math.sqrt(schedule.alphas[t]) * trajectory.states[t - 1]
        total = total + resid.square().sum(axis=1) * (-0.5 / schedule.betas[t]) \
            - 0.5 * d * (defaults.LOG_2PI + math.log(schedule.betas[t]))
    return total


def prior_reg_term(x, posterior, prior, n_mc=1, seed=0, kde=None, labels=None, log_prior=None, return_z=False):
    """Monte Carlo estimate of -KL(q(y, z|x) || r(y|z) p(z)), per item.

    Sample m uses ``derive_seed(seed, m)``; with ``return_z`` the sampled z are
    returned too, so other terms can share the draws.
    ``log_prior`` replaces the prior's own density (a callable on a batch of z),
    which is how a partition-conditioned density is plugged in.
    """
    if n_mc < 1:
        raise ContractViolation("n_mc must be >= 1, got %d" % n_mc)
    if log_prior is None:
        if not prior.analytic and kde is None:
            raise ContractViolation("prior %r needs a fitted KDE for its density" % prior.kind)

        def log_prior(z):
            return prior_log_density(prior, z, kde)

    total = 0.0
    zs = []
    for m in range(n_mc):
        z, traj = reverse_sample(x, posterior, derive_seed(seed, m), labels=labels)
        total = total + forward_log_density(traj, posterior.schedule) + log_prior(z) + entropy_term(posterior, traj)
        zs.append(z)
    total = total * (1.0 / n_mc)
    return (total, zs) if return_z else total


def draw_noise_targets(n, d, steps, seed, element_seeds=None):
    """Step indices (uniform in 1..T) and forward noise for a batch.

    With ``element_seeds`` each row draws from its own seed, so the draws follow
    the items when the batch is reordered.
    """
    if element_seeds is None:
        gen = rng(seed)
        return gen.integers(1, steps + 1, size=n), gen.standard_normal((n, d))
    t = np.zeros(n, dtype=np.int64)
    eps = np.zeros((n, d))
    for i, s in enumerate(element_seeds):
        gen = rng(s)
        t[i] = gen.integers(1, steps + 1)
        eps[i] = gen.standard_normal(d)
    return t, eps


def diffusion_loss(z, x_feat, posterior, seed, labels=None, element_seeds=None):
    """Noise-prediction loss: batch mean of ||eps - eps_hat(y_t, x_feat, t)||^2.

    ``z`` is treated as data (no gradient flows into it); ``x_feat=None`` is the
    unconditional mode.
    """
    z = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64)
    if z.ndim != 2 or len(z) == 0:
        raise ContractViolation("diffusion_loss needs a non-empty batch, got shape %s" % (z.shape,))
    n, d = z.shape
    t, eps = draw_noise_targets(n, d, posterior.steps, seed, element_seeds)
    y_t = forward_marginal(z, t, eps, posterior.schedule)
    eps_hat = posterior.eps_net.predict_noise(y_t, x_feat, t, labels)
    return (eps_hat - eps).square().sum(axis=1).mean()


def _gaussian_kl(mu_q, var_q, mu_p, var_p):
    """KL(N(mu_q, var_q) || N(mu_p, var_p)) per row, diagonal covariances."""
    return 0.5 * np.sum(np.log(var_p / var_q) + (var_q + (mu_q - mu_p) ** 2) / var_p - 1.0, axis=-1)


def diffusion_elbo(z, x, posterior, seed, labels=None):
    """Lower bound on log q(z | x) through the forward chain, per item.

    -KL(r(y_T|z) || q(y_T|x)) - sum_{t>=2} KL(r(y_{t-1}|y_t, z) || q(y_{t-1}|y_t, x))
    + log q(z | y_1, x), each in closed form given one forward draw per step.
    Evaluation only; runs outside any tape.
    """
    s = posterior.schedule
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    gen = rng(seed)
    x_feat = posterior.x_features(x)
    mu, logvar = posterior.encoder.encode(x)
    mu, var = mu.data, np.exp(logvar.data)
    bound = -_gaussian_kl(math.sqrt(s.alpha_bars[-1]) * z, np.full_like(z, 1.0 - s.alpha_bars[-1]), mu, var)
    variances = posterior.variances
    for t in range(1, s.steps + 1):
        y_t = forward_marginal(z, t, gen.standard_normal((n, d)), s)
        mean_q = posterior.reverse_mean(Tensor(y_t), t, x_feat, labels).data
        if t == 1:
            bound = bound - 0.5 * np.sum((z - mean_q) ** 2, axis=1) / variances[1] \
                - 0.5 * d * (defaults.LOG_2PI + math.log(variances[1]))
            continue
        ab, ab_prev = s.alpha_bars[t], s.alpha_bars[t - 1]
        mean_r = (math.sqrt(ab_prev) * s.betas[t] / (1.0 - ab)) * z \
            + (math.sqrt(s.alphas[t]) * (1.0 - ab_prev) / (1.0 - ab)) * y_t
        var_r = (1.0 - ab_prev) / (1.0 - ab) * s.betas[t]
        bound = bound - _gaussian_kl(mean_r, np.full_like(z, var_r), mean_q, np.full_like(z, variances[t]))
    return bound


def sleep_bound(posterior, decoder, prior, n, seed, fantasy_noise=True, sleep_entropy=None, use_labels=False):
    """Bound value of the sleep term on fantasy pairs (z ~ p, x ~ p(x|z)).

    E[lower bound of log q(z|x)] plus the expected entropy of the true
    posterior when ``sleep_entropy`` supplies it; without it the value is the
    cross-entropy part only.
    """
    z, labels = prior.sample(n, derive_seed(seed, 0))
    x_hat = fantasy(decoder, z, derive_seed(seed, 1), sample=fantasy_noise)
    value = float(np.mean(diffusion_elbo(z, x_hat, posterior, derive_seed(seed, 2), labels if use_labels else None)))
    if sleep_entropy is not None:
        value += float(sleep_entropy)
    return value


def fantasy(decoder, z, seed, sample=False):
    """Fantasy inputs from the decoder: its mean, or a draw from p(x|z)."""
    mean = decoder.decode(z)
    mean = mean.data if isinstance(mean, Tensor) else np.asarray(mean, dtype=np.float64)
    if not sample:
        return mean
    gen = rng(seed)
    if getattr(decoder, "head", "identity") == "sigmoid":
        return (gen.uniform(size=mean.shape) < mean).astype(np.float64)
    return mean + gen.standard_normal(mean.shape)
