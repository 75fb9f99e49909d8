# -*- coding: utf-8 -*-
import numpy as np
import pytest

from ddvi_lab.exceptions import ContractViolation
from ddvi_lab.nets import MlpDecoder, MlpEncoder, TimeMlp

from helpers import gradient_pair


def rel_err(a, b):
    return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))


@pytest.fixture
def x():
    return np.random.default_rng(0).uniform(size=(5, 6))


def test_zero_encoder(x):
    enc = MlpEncoder(6, 2, 8, seed=0).zero_()
    mu, logvar = enc.encode(x)
    np.testing.assert_array_equal(mu.data, np.zeros((5, 2)))
    np.testing.assert_array_equal(logvar.data, np.zeros((5, 2)))


def test_encoder_is_deterministic(x):
    a = MlpEncoder(6, 2, 8, seed=3)
    b = MlpEncoder(6, 2, 8, seed=3)
    np.testing.assert_array_equal(a.encode(x)[0].data, b.encode(x)[0].data)
    np.testing.assert_array_equal(a.encode(x)[1].data, a.encode(x)[1].data)


def test_encoder_rejects_wrong_width():
    with pytest.raises(ContractViolation, match="dimension 6"):
        MlpEncoder(6, 2, 8).encode(np.zeros((2, 5)))


def test_single_vector_is_a_batch_of_one():
    mu, _ = MlpEncoder(6, 2, 8).encode(np.zeros(6))
    assert mu.shape == (1, 2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_encoder_gradient(x, seed):
    enc = MlpEncoder(6, 2, 8, seed=seed)
    grad, numeric = gradient_pair(lambda: enc.encode(x)[0].sum(), enc.l1.weight)
    assert rel_err(grad, numeric) < 1e-4


def test_encoder_logvar_gradient(x):
    enc = MlpEncoder(6, 2, 8, seed=4)
    grad, numeric = gradient_pair(lambda: enc.encode(x)[1].square().sum(), enc.l2.bias)
    assert rel_err(grad, numeric) < 1e-4


def test_classifier_head(x):
    enc = MlpEncoder(6, 2, 8, n_classes=10, seed=0)
    assert enc.class_logits(x).shape == (5, 10)
    with pytest.raises(ContractViolation, match="classifier"):
        MlpEncoder(6, 2, 8).class_logits(x)


def test_zero_decoder_heads():
    z = np.random.default_rng(1).normal(size=(4, 2))
    np.testing.assert_array_equal(MlpDecoder(2, 6, 8, head="sigmoid").zero_().decode(z).data, np.full((4, 6), 0.5))
    np.testing.assert_array_equal(MlpDecoder(2, 6, 8, head="identity").zero_().decode(z).data, np.zeros((4, 6)))


@pytest.mark.parametrize("head", ["sigmoid", "identity"])
def test_decoder_gradient(head):
    z = np.random.default_rng(2).normal(size=(4, 2))
    dec = MlpDecoder(2, 6, 8, head=head, seed=5)
    grad, numeric = gradient_pair(lambda: dec.decode(z).square().sum(), dec.layers[0].weight)
    assert rel_err(grad, numeric) < 1e-4


def test_linear_decoder_has_one_layer():
    dec = MlpDecoder(1, 1, 0, head="identity")
    assert [name for name, _ in dec.named_parameters()] == ["out.weight", "out.bias"]


def test_unknown_head():
    with pytest.raises(ContractViolation, match="head"):
        MlpDecoder(2, 6, 8, head="softmax")


def test_zero_noise_net():
    net = TimeMlp(2, 6, steps=5, hidden=8, layers=2).zero_()
    y = np.random.default_rng(3).normal(size=(4, 2))
    np.testing.assert_array_equal(net.predict_noise(y, np.ones((4, 6)), 3).data, np.zeros((4, 2)))


def test_noise_net_depends_on_step():
    net = TimeMlp(2, 6, steps=5, hidden=8, layers=2, seed=1)
    y = np.random.default_rng(4).normal(size=(4, 2))
    feat = np.ones((4, 6))
    assert not np.allclose(net.predict_noise(y, feat, 1).data, net.predict_noise(y, feat, 4).data)


def test_unconditional_equals_zero_features():
    net = TimeMlp(2, 6, steps=5, hidden=8, layers=2, seed=1)
    y = np.random.default_rng(5).normal(size=(4, 2))
    t = np.array([1, 2, 3, 5])
    np.testing.assert_array_equal(net.predict_noise(y, None, t).data, net.predict_noise(y, np.zeros((4, 6)), t).data)


@pytest.mark.parametrize("t", [0, 6])
def test_step_out_of_range(t):
    net = TimeMlp(2, 6, steps=5, hidden=8, layers=1)
    with pytest.raises(ContractViolation, match="out of range"):
        net.predict_noise(np.zeros((2, 2)), None, t)


def test_label_conditioning():
    net = TimeMlp(2, 0, steps=5, hidden=8, layers=1, n_labels=3, seed=2)
    y = np.zeros((2, 2))
    a = net.predict_noise(y, None, 2, labels=[0, 0]).data
    b = net.predict_noise(y, None, 2, labels=[2, 2]).data
    assert not np.allclose(a, b)
    with pytest.raises(ContractViolation, match="label"):
        net.predict_noise(y, None, 2, labels=[0, 3])


def test_noise_net_gradients():
    net = TimeMlp(2, 6, steps=5, hidden=8, layers=2, seed=6)
    gen = np.random.default_rng(6)
    y, feat, t = gen.normal(size=(4, 2)), gen.normal(size=(4, 6)), np.array([1, 2, 5, 5])
    for param in (net.layers[0].weight, net.layers[1].embedding, net.out.bias):
        grad, numeric = gradient_pair(lambda: net.predict_noise(y, feat, t).square().sum(), param)
        assert rel_err(grad, numeric) < 1e-4


def test_parameter_names():
    names = [name for name, _ in TimeMlp(2, 6, steps=5, hidden=8, layers=2).named_parameters()]
    assert names[:3] == ["layers.0.weight", "layers.0.bias", "layers.0.embedding"]
    assert names[-2:] == ["out.weight", "out.bias"]
    enc_names = [name for name, _ in MlpEncoder(6, 2, 8).named_parameters()]
    assert enc_names == ["l1.weight", "l1.bias", "l2.weight", "l2.bias", "mu.weight", "mu.bias",
                         "logvar.weight", "logvar.bias"]
