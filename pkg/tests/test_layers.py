import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from aewb import autodiff as ad
from aewb.architectures import (dense_autoencoder, denoising_net, detection_net, hashing_net,
                                hidden_width, variational_net, visualization_net)
from aewb.autodiff import ContractError, DimensionError, Tape, grad_check
from aewb.layers import (EVAL, TRAIN, Conv, Deconv, Dense, GaussianNoise, MaxPool, Network, Sampling,
                         Upsample, code_noise, sample_latent)
from aewb.prng import make_rng
from aewb.serialize import FormatError, dumps, load, loads, save


def dense_out(layer, x):
    net_in = Tape().constant(x)
    from aewb.layers import Context
    return layer.forward(net_in.tape, net_in, Context()).value


def built_dense(n_in, n_out, act, W, b):
    layer = Dense(n_out, act)
    layer.build((n_in,), make_rng(0))
    layer.params[0].value[...] = W
    layer.params[1].value[...] = b
    return layer


class TestDense:
    def test_identity(self, rng):
        x = rng.standard_normal((4, 3))
        assert_array_equal(dense_out(built_dense(3, 3, "linear", np.eye(3), 0), x), x)

    def test_hand_example(self):
        layer = built_dense(2, 1, "linear", [[1.0], [1.0]], [0.5])
        assert_array_equal(dense_out(layer, np.array([[1.0, 1.0]])), [[2.5]])

    def test_zero_weights_give_activation_of_bias(self, rng):
        layer = built_dense(3, 2, "sigmoid", 0.0, [0.0, 1.0])
        out = dense_out(layer, rng.standard_normal((5, 3)))
        assert_allclose(out, np.tile([0.5, 1 / (1 + np.exp(-1))], (5, 1)))

    def test_init_bounds(self):
        layer = Dense(30, "sigmoid")
        layer.build((50,), make_rng(3))
        limit = np.sqrt(6 / 80)
        assert np.abs(layer.params[0].value).max() <= limit
        assert_array_equal(layer.params[1].value, np.zeros(30))

    def test_wrong_width(self):
        layer = built_dense(3, 2, "linear", 1.0, 0.0)
        with pytest.raises(DimensionError):
            dense_out(layer, np.ones((2, 4)))


class TestConvLayers:
    def test_conv_same_padding_keeps_size(self):
        layer = Conv(4, 3)
        assert layer.build((7, 5, 2), make_rng(0)) == (7, 5, 4)

    def test_stride_two_halves(self):
        assert Conv(4, 3, 2).build((8, 8, 1), make_rng(0)) == (4, 4, 4)
        assert Deconv(4, 3, 2).build((4, 4, 1), make_rng(0)) == (8, 8, 4)

    def test_pool_and_upsample_shapes(self):
        assert MaxPool().build((6, 4, 3), make_rng(0)) == (3, 2, 3)
        assert MaxPool().build((5, 5, 3), make_rng(0)) == (3, 3, 3)
        assert Upsample().build((3, 2, 3), make_rng(0)) == (6, 4, 3)

    def test_conv_needs_image(self):
        with pytest.raises(DimensionError):
            Conv(4, 3).build((16,), make_rng(0))


class TestCodeNoise:
    def test_zero_sigma(self, rng):
        z = Tape().constant(rng.standard_normal((3, 2)))
        assert code_noise(z, 0.0, TRAIN, rng) is z

    def test_eval_mode_is_identity(self, rng):
        z = Tape().constant(rng.standard_normal((3, 2)))
        assert_array_equal(code_noise(z, 5.0, EVAL, rng).value, z.value)

    def test_empirical_std(self):
        z = Tape().constant(np.zeros((100_000, 1)))
        out = code_noise(z, 0.2, TRAIN, make_rng(7)).value
        assert 0.195 <= out.std() <= 0.205

    def test_negative_sigma(self, rng):
        with pytest.raises(ContractError):
            code_noise(Tape().constant(np.zeros(2)), -0.1, TRAIN, rng)

    def test_layer_draws_from_the_run_stream(self):
        net = Network((3,), [Dense(2, "sigmoid"), GaussianNoise(0.5), Dense(3, "sigmoid")], 2, seed=1)
        x = np.full((4, 3), 0.5)
        net.train()
        a = net.run(Tape(), x, make_rng(9)).output.value
        b = net.run(Tape(), x, make_rng(9)).output.value
        c = net.run(Tape(), x, make_rng(10)).output.value
        assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSampleLatent:
    def test_zero_eps(self, rng):
        t = Tape()
        mu = t.constant(rng.standard_normal((2, 3)))
        assert_array_equal(sample_latent(mu, t.constant(rng.standard_normal((2, 3))), np.zeros((2, 3))).value,
                           mu.value)

    def test_unit_sigma(self, rng):
        t = Tape()
        mu = t.constant(rng.standard_normal((2, 3)))
        z = sample_latent(mu, t.constant(np.zeros((2, 3))), np.ones((2, 3)))
        assert_allclose(z.value, mu.value + 1)

    def test_statistics(self):
        from aewb.prng import normal
        t = Tape()
        mu = t.constant(np.zeros((100_000, 1)))
        z = sample_latent(mu, t.constant(np.zeros((100_000, 1))), normal(make_rng(11), (100_000, 1))).value
        assert -0.01 <= z.mean() <= 0.01
        assert 0.99 <= z.std() <= 1.01

    def test_shape_mismatch(self):
        t = Tape()
        with pytest.raises(DimensionError):
            sample_latent(t.constant(np.zeros((2, 3))), t.constant(np.zeros((2, 2))), np.zeros((2, 3)))

    def test_gradient_with_fixed_eps(self, rng):
        from aewb.autodiff import Parameter
        mu, lv = Parameter(rng.uniform(-2, 2, (3, 2))), Parameter(rng.uniform(-2, 2, (3, 2)))
        eps = rng.standard_normal((3, 2))
        w = rng.standard_normal((3, 2))
        assert grad_check(lambda t: ad.sum(sample_latent(t.param(mu), t.param(lv), eps) * w), [mu, lv]) < 1e-6


NETWORKS = {
    "fig4 21-6-2": lambda: visualization_net(21, seed=0),
    "fig4 36-8-2": lambda: visualization_net(36, seed=0),
    "fig6 conv": lambda: denoising_net(12, 12, 3, scale=0.0625, seed=0),
    "fig6 odd side": lambda: denoising_net(10, 10, 1, scale=0.0625, seed=0),
    "fig8 hash": lambda: hashing_net(40, 7, 16, seed=0),
    "fig11 detect": lambda: detection_net(187, seed=0),
    "fig12 vae": lambda: variational_net(16, 4, seed=0),
    "sparse deep": lambda: dense_autoencoder(10, [8, 6, 3], seed=0),
}


@pytest.mark.parametrize("name", sorted(NETWORKS))
def test_output_shape_equals_input_shape(name):
    net = NETWORKS[name]()
    x = make_rng(0).random((2,) + net.input_shape)
    assert net.predict(x).shape == x.shape


@pytest.mark.parametrize("name", sorted(NETWORKS))
def test_eval_forward_is_pure(name):
    net = NETWORKS[name]().eval()
    x = make_rng(1).random((3,) + net.input_shape)
    a = net.run(Tape(), x, make_rng(5)).output.value
    b = net.run(Tape(), x, make_rng(6)).output.value
    assert_array_equal(a, b)


def test_full_scale_shapes_are_constructible():
    assert visualization_net(21).code_shape == (2,)
    assert hidden_width(21, 2) == 6 and hidden_width(36, 2) == 8
    net = variational_net(64, 32)
    assert net.code_shape == (32,)
    assert [l.out_shape for l in net.layers[:3]] == [(32, 32, 8), (16, 16, 16), (8, 8, 32)]


def test_mismatched_stack_is_rejected():
    with pytest.raises(DimensionError):
        Network((5,), [Dense(2), Dense(4)], 1)
    with pytest.raises(ContractError):
        Network((5,), [Dense(2), Dense(5)], 0)


def test_sampling_layer_outputs_mean_in_eval():
    net = Network((4,), [Dense(4, "linear"), Sampling(), Dense(4, "sigmoid")], 2, seed=0)
    x = make_rng(2).random((3, 4))
    code = net.encode_array(x)
    t = Tape()
    stats = net.layers[0].forward(t, t.constant(x), __import__("aewb.layers", fromlist=["Context"]).Context())
    assert_array_equal(code, stats.value[:, :2])


@pytest.mark.parametrize("name", ["fig6 conv", "fig12 vae", "fig8 hash"])
def test_layer_gradients_through_network(name):
    net = NETWORKS[name]()
    params = net.parameters()
    # zero biases leave some ReLU inputs exactly on the kink, where the
    # finite difference straddles two slopes; shift them off it
    r = make_rng(8)
    for p in params:
        if p.name == "b":
            p.value[...] = r.uniform(0.05, 0.1, p.shape)
    x = make_rng(3).random((2,) + net.input_shape)
    net.train()

    def obj(t):
        return ad.mean(ad.square(net.run(t, x, make_rng(4)).output))

    sub = [p for p in params if p.value.size <= 300]
    assert grad_check(obj, sub) < 1e-4


class TestSerialize:
    @pytest.mark.parametrize("name", sorted(NETWORKS))
    def test_roundtrip(self, name):
        net = NETWORKS[name]()
        back = loads(dumps(net))
        assert back.describe() == net.describe()
        for p, q in zip(net.parameters(), back.parameters()):
            assert_array_equal(p.value, q.value)
        x = make_rng(0).random((2,) + net.input_shape)
        assert_array_equal(back.predict(x), net.predict(x))

    def test_header(self):
        data = dumps(detection_net(5))
        assert data[:5] == b"AEWB1"
        assert int.from_bytes(data[5:9], "little") == 2

    def test_sidecar(self, tmp_path):
        paths = save(detection_net(5), tmp_path / "m.aewb")
        assert [p.name for p in paths] == ["m.aewb", "m.aewb.json"]
        assert load(paths[0]).describe()["layers"][0]["kind"] == "dense"

    def test_corrupt_input(self):
        data = dumps(detection_net(5))
        with pytest.raises(FormatError):
            loads(b"XXXXX" + data[5:])
        with pytest.raises(FormatError):
            loads(data[:-3])
