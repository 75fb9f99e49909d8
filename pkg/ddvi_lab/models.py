# -*- coding: utf-8 -*-
from collections import OrderedDict

import numpy as np

from . import checkpoint, defaults
from .diffusion import DiffusionPosterior, NoiseSchedule, reverse_sample
from .exceptions import ContractViolation
from .nets import MlpDecoder, MlpEncoder, TimeMlp
from .priors import prior_from_config
from .utils import derive_seed, make_md5, rng


class DdviModel(object):
    """Everything a run trains or evaluates: networks, schedule, prior and its densities.

    theta is the decoder; phi is the encoder plus the noise network. The KDE of
    a structured prior (and, for semi-supervised runs, one KDE per partition)
    is refitted from seeds, never stored in checkpoints.

    ``sleep_entropy`` is the expected entropy of the true posterior p(z|x)
    under p(x, z). It is known only for conjugate toy models; when set, the
    reported sleep bound includes it.
    """

    def __init__(self, encoder, decoder, eps_net, schedule, prior, sigma_mode=defaults.SIGMA_MODE,
                 condition_on=defaults.CONDITION_ON, kde=None, partition_kdes=None, sleep_entropy=None, variances=None):
        self.encoder = encoder
        self.decoder = decoder
        self.eps_net = eps_net
        self.schedule = schedule
        self.prior = prior
        self.sigma_mode = sigma_mode
        self.condition_on = condition_on
        self.kde = kde
        self.partition_kdes = partition_kdes
        self.sleep_entropy = sleep_entropy
        self.posterior = DiffusionPosterior(encoder, eps_net, schedule, sigma_mode, condition_on, variances) \
            if eps_net is not None else None

    @classmethod
    def from_config(cls, config, data_dim):
        prior = prior_from_config(config)
        n_classes = prior.n_partitions if config.mode == "semisup" else 0
        encoder = MlpEncoder(data_dim, config.latent_dim, config.hidden, n_classes=n_classes,
                             seed=derive_seed(config.init_seed, 0))
        decoder = MlpDecoder(config.latent_dim, data_dim, config.hidden, head=config.head,
                             seed=derive_seed(config.init_seed, 1))
        schedule = NoiseSchedule.from_config(config)
        eps_net = None
        if config.mode != "aevb-baseline":
            cond_dim = config.hidden if config.condition_on == "features" else data_dim
            eps_net = TimeMlp(config.latent_dim, cond_dim, config.steps, config.time_hidden, config.time_layers,
                              n_labels=n_classes, seed=derive_seed(config.init_seed, 2))
        kde = None
        if not prior.analytic:
            kde = prior.fit_kde(config.kde_points, derive_seed(config.seed, 7))
        partition_kdes = None
        if config.mode == "semisup":
            per_label = max(1, config.kde_points // prior.n_partitions)
            partition_kdes = [prior.fit_kde(per_label, derive_seed(config.seed, 8, label), label=label)
                              for label in range(prior.n_partitions)]
        return cls(encoder, decoder, eps_net, schedule, prior, config.sigma_mode, config.condition_on,
                   kde=kde, partition_kdes=partition_kdes)

    @property
    def latent_dim(self):
        return self.encoder.latent_dim

    @property
    def diffusion(self):
        return self.eps_net is not None

    def modules(self):
        out = OrderedDict([("encoder", self.encoder), ("decoder", self.decoder)])
        if self.eps_net is not None:
            out["eps_net"] = self.eps_net
        return out

    def named_parameters(self):
        for prefix, module in self.modules().items():
            yield from module.named_parameters(prefix + ".")

    def theta_params(self):
        return self.decoder.parameters()

    def phi_params(self):
        params = self.encoder.parameters()
        if self.eps_net is not None:
            params += self.eps_net.parameters()
        return params

    def parameters(self):
        return self.theta_params() + self.phi_params()

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state):
        own = OrderedDict(self.named_parameters())
        checkpoint.check_compatible(OrderedDict((k, p.data) for k, p in own.items()), state)
        for name, p in own.items():
            p.data[...] = state[name]

    def save(self, path):
        checkpoint.save(path, self.state_dict())

    def load(self, path):
        self.load_state_dict(checkpoint.load(path))

    def theta_checksum(self):
        return make_md5(*[p.data for p in self.theta_params()])

    def phi_checksum(self):
        return make_md5(*[p.data for p in self.phi_params()])

    def partition_log_prior(self, label):
        """log p(z | l) as a batch callable, from the per-partition KDE."""
        if self.partition_kdes is None:
            raise ContractViolation("model has no per-partition densities")
        return self.partition_kdes[label].log_density_tensor

    def latents(self, x, seed):
        """Latent codes of a batch: the reverse-chain z, or a posterior draw for the baseline."""
        if self.diffusion:
            z, _ = reverse_sample(x, self.posterior, seed)
            return z.data
        mu, logvar = self.encoder.encode(x)
        noise = rng(seed).standard_normal(mu.shape)
        return mu.data + np.exp(0.5 * logvar.data) * noise
