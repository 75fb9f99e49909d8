# -*- coding: utf-8 -*-
"""Encoder, decoder and time-conditioned noise-prediction MLPs.

All networks take batches (rows are items). A single vector is promoted to a
batch of one.
"""
from collections import OrderedDict

import numpy as np

from . import defaults
from .autodiff import Tensor, as_tensor, concat, take_rows
from .exceptions import ContractViolation


class Module(object):
    """Container of parameter tensors and sub-modules, in attribute order."""

    def named_parameters(self, prefix=""):
        for name, value in self.__dict__.items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters("%s%s.%d." % (prefix, name, i))

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def zero_(self):
        for p in self.parameters():
            p.data[...] = 0.0
        return self


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def as_batch(x, dim, what):
    x = as_tensor(x)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ContractViolation("%s must have dimension %d, got shape %s" % (what, dim, x.shape))
    return x


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = _uniform(rng, in_dim, (in_dim, out_dim))
        self.bias = _uniform(rng, in_dim, (out_dim,))

    def __call__(self, x):
        return x @ self.weight + self.bias


class TimeLinear(Linear):
    """Linear layer plus a learned per-step offset (one row per t = 0..T)."""

    def __init__(self, in_dim, out_dim, steps, rng):
        super().__init__(in_dim, out_dim, rng)
        self.embedding = _uniform(rng, out_dim, (steps + 1, out_dim))

    def __call__(self, x, t):
        return super().__call__(x) + take_rows(self.embedding, t)


class MlpEncoder(Module):
    """q(y_T | x): two relu hidden layers, then mean and log-variance heads.

    With ``n_classes`` > 0 a linear classifier head on the second hidden layer
    gives the logits of q(l | x).
    """

    def __init__(self, data_dim, latent_dim=defaults.LATENT_DIM, hidden=defaults.HIDDEN, n_classes=0, seed=0):
        rng = np.random.default_rng(seed)
        self.data_dim = data_dim
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.n_classes = n_classes
        self.l1 = Linear(data_dim, hidden, rng)
        self.l2 = Linear(hidden, hidden, rng)
        self.mu = Linear(hidden, latent_dim, rng)
        self.logvar = Linear(hidden, latent_dim, rng)
        if n_classes:
            self.classifier = Linear(hidden, n_classes, rng)

    def features(self, x):
        x = as_batch(x, self.data_dim, "encoder input")
        return self.l2(self.l1(x).relu()).relu()

    def encode(self, x):
        h = self.features(x)
        return self.mu(h), self.logvar(h)

    __call__ = encode

    def class_logits(self, x):
        if not self.n_classes:
            raise ContractViolation("encoder was built without a classifier head")
        return self.classifier(self.features(x))


class MlpDecoder(Module):
    """p(x | z). ``hidden=0`` gives a single linear map."""

    def __init__(self, latent_dim, data_dim, hidden=defaults.HIDDEN, head="sigmoid", seed=0):
        if head not in ("sigmoid", "identity"):
            raise ContractViolation("unknown decoder head %r" % head)
        rng = np.random.default_rng(seed)
        self.latent_dim = latent_dim
        self.data_dim = data_dim
        self.hidden = hidden
        self.head = head
        if hidden:
            self.layers = [Linear(latent_dim, hidden, rng), Linear(hidden, hidden, rng)]
            self.out = Linear(hidden, data_dim, rng)
        else:
            self.layers = []
            self.out = Linear(latent_dim, data_dim, rng)

    def logits(self, z):
        h = as_batch(z, self.latent_dim, "decoder input")
        for layer in self.layers:
            h = layer(h).relu()
        return self.out(h)

    def decode(self, z):
        out = self.logits(z)
        return out.sigmoid() if self.head == "sigmoid" else out

    __call__ = decode


class TimeMlp(Module):
    """eps(y_t, x_feat, t): time-conditioned MLP predicting the forward noise.

    The input row is ``[y_t, x_feat, onehot(label)]``; each hidden layer adds
    its time-embedding row after the linear map and before the relu.
    """

    def __init__(self, latent_dim, cond_dim, steps, hidden=defaults.TIME_HIDDEN, layers=defaults.TIME_LAYERS,
                 n_labels=0, seed=0):
        rng = np.random.default_rng(seed)
        self.latent_dim = latent_dim
        self.cond_dim = cond_dim
        self.steps = steps
        self.n_labels = n_labels
        in_dim = latent_dim + cond_dim + n_labels
        self.layers = [TimeLinear(in_dim if i == 0 else hidden, hidden, steps, rng) for i in range(layers)]
        self.out = Linear(hidden, latent_dim, rng)

    def _steps(self, t, n):
        t = np.asarray(t, dtype=np.int64)
        if t.ndim == 0:
            t = np.full(n, int(t), dtype=np.int64)
        if t.shape != (n,):
            raise ContractViolation("need one step index per row, got shape %s for %d rows" % (t.shape, n))
        if n and (t.min() < 1 or t.max() > self.steps):
            raise ContractViolation("step index out of range 1..%d: %s" % (self.steps, t))
        return t

    def predict_noise(self, y_t, x_feat, t, labels=None):
        """Predict the noise in ``y_t`` at step ``t``.

        ``x_feat=None`` is the unconditional mode (conditioning zeroed); so is
        ``labels=None`` for a label-conditioned network.
        """
        y_t = as_batch(y_t, self.latent_dim, "y_t")
        n = y_t.shape[0]
        t = self._steps(t, n)
        parts = [y_t]
        if self.cond_dim:
            if x_feat is None:
                x_feat = np.zeros((n, self.cond_dim))
            parts.append(as_batch(x_feat, self.cond_dim, "x_feat"))
        if self.n_labels:
            onehot = np.zeros((n, self.n_labels))
            if labels is not None:
                labels = np.asarray(labels, dtype=np.int64)
                if labels.size and (labels.min() < 0 or labels.max() >= self.n_labels):
                    raise ContractViolation("label id outside 0..%d" % (self.n_labels - 1))
                onehot[np.arange(n), labels] = 1.0
            parts.append(onehot)
        h = concat(parts, axis=1) if len(parts) > 1 else y_t
        for layer in self.layers:
            h = layer(h, t).relu()
        return self.out(h)

    __call__ = predict_noise
