import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from aewb import autodiff as ad
from aewb import objectives as ob
from aewb.architectures import dense_autoencoder
from aewb.autodiff import ContractError, DimensionError, Tape, grad_check
from aewb.layers import Conv, Dense, MaxPool, Network, Sampling, Upsample, EVAL, TRAIN
from aewb.prng import make_rng

from oracles import fd_jacobian


def c(x):
    return Tape().constant(np.asarray(x, dtype=float))


def pair(x, y):
    t = Tape()
    return t.constant(np.asarray(x, float)), t.constant(np.asarray(y, float))


unit_batches = arrays(np.float64, (3, 4), elements=st.floats(0, 1))
grid_batches = arrays(np.float64, (3, 4), elements=st.integers(0, 1024).map(lambda i: i / 1024))


class TestDistances:
    def test_mse_zero_on_equal(self, rng):
        x = rng.random((3, 5))
        assert ob.mse(*pair(x, x)).value == 0.0

    def test_mse_hand_value(self):
        assert ob.mse(*pair([[1, 0, 1, 0]], [[0.5, 0, 0.5, 0]])).value == pytest.approx(0.125, abs=1e-15)

    def test_bce_half(self):
        assert ob.bce(*pair([[1.0]], [[0.5]])).value == pytest.approx(np.log(2), abs=1e-12)
        assert ob.bce(*pair([[0.5]], [[0.5]])).value == pytest.approx(np.log(2), abs=1e-12)

    def test_bce_confident_and_correct(self):
        x = np.array([[0.0, 1.0, 1.0, 0.0]])
        assert 0 <= ob.bce(*pair(x, x)).value <= 1.2e-7

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ob.mse(*pair(np.zeros((2, 3)), np.zeros((2, 4))))

    @given(unit_batches, unit_batches)
    def test_nonnegative(self, x, y):
        assert ob.mse(*pair(x, y)).value >= 0
        # bce is minimized at x' = x; its floor there is the entropy of x
        assert ob.bce(*pair(x, y)).value >= ob.bce(*pair(x, x)).value - 1e-9

    # a 1/1024 grid keeps squared gaps out of the subnormal range, where they round to 0
    @given(grid_batches, grid_batches)
    def test_mse_zero_iff_equal(self, x, y):
        assert (ob.mse(*pair(x, y)).value == 0) == np.array_equal(x, y)


class TestSparse:
    def test_quadratic_at_target(self):
        assert ob.sparse_penalty_quadratic(c(np.full((4, 3), 0.2)), 0.2).value == pytest.approx(0, abs=1e-15)

    def test_quadratic_hand_value(self):
        assert ob.sparse_penalty_quadratic(c([[0.2]]), 0.1).value == pytest.approx(0.01, abs=1e-15)

    def test_quadratic_uses_batch_mean(self):
        # unit rate is the batch mean 0.2 even though no row equals it
        assert ob.sparse_penalty_quadratic(c([[0.0], [0.4]]), 0.1).value == pytest.approx(0.01)

    def test_kl_at_target(self):
        assert ob.sparse_penalty_kl(c(np.full((5, 2), 0.3)), 0.3).value == pytest.approx(0, abs=1e-12)

    def test_kl_hand_value(self):
        expected = 0.1 * np.log(0.2) + 0.9 * np.log(1.8)
        assert ob.sparse_penalty_kl(c([[0.5]]), 0.1).value == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.3680642071684971, abs=1e-15)

    @given(arrays(np.float64, (4, 3), elements=st.floats(0, 1)), st.floats(0.01, 0.99))
    def test_nonnegative(self, z, rho):
        assert ob.sparse_penalty_quadratic(c(z), rho).value >= 0
        assert ob.sparse_penalty_kl(c(z), rho).value >= -1e-12


def encoder_records(net, x):
    run = net.run(Tape(), x)
    enc = set(map(id, net.encoder))
    return [r for r in run.records if id(r.layer) in enc]


class TestContractive:
    def test_linear_encoder_is_sum_of_squared_weights(self, rng):
        net = Network((4,), [Dense(2, "linear"), Dense(4, "linear")], 1, seed=3)
        W = net.layers[0].params[0].value
        for x in (rng.random((1, 4)), rng.random((5, 4))):
            assert ob.contractive_penalty(encoder_records(net, x)).value == pytest.approx(np.sum(W ** 2))

    def test_single_sigmoid_unit(self):
        net = Network((1,), [Dense(1, "sigmoid"), Dense(1, "linear")], 1)
        net.layers[0].params[0].value[...] = 1.0
        net.layers[0].params[1].value[...] = 0.0
        assert ob.contractive_penalty(encoder_records(net, np.zeros((1, 1)))).value == pytest.approx(0.0625)

    def test_sum_reduction(self, rng):
        net = Network((3,), [Dense(2, "linear"), Dense(3, "linear")], 1, seed=0)
        recs = encoder_records(net, rng.random((4, 3)))
        assert ob.contractive_penalty(recs, "sum").value == pytest.approx(4 * ob.contractive_penalty(recs).value)

    @pytest.mark.parametrize("acts", [("sigmoid", "sigmoid"), ("tanh", "relu"), ("relu", "linear")])
    def test_matches_fd_jacobian(self, acts, rng):
        net = Network((5,), [Dense(4, acts[0]), Dense(2, acts[1]), Dense(5, "sigmoid")], 2, seed=4)
        for p in net.parameters():
            if p.name == "b":
                p.value[...] = rng.uniform(0.1, 0.3, p.shape)
        X = rng.uniform(0.1, 1, (3, 5))
        got = ob.contractive_penalty(encoder_records(net, X)).value
        frob = [np.sum(fd_jacobian(lambda v: net.encode_array(v[None])[0], x) ** 2) for x in X]
        assert got == pytest.approx(np.mean(frob), rel=1e-4)

    def test_rejects_conv_encoder(self, rng):
        net = Network((4, 4, 1), [Conv(2, 3), MaxPool(), Upsample(), Conv(1, 3, activation="sigmoid")], 2)
        with pytest.raises(ContractError):
            ob.contractive_penalty(encoder_records(net, rng.random((1, 4, 4, 1))))

    def test_penalty_gradient(self, rng):
        net = Network((4,), [Dense(3, "sigmoid"), Dense(2, "tanh"), Dense(4, "sigmoid")], 2, seed=5)
        X = rng.random((3, 4))
        enc = set(map(id, net.encoder))

        def obj(t):
            run = net.run(t, X)
            return ob.contractive_penalty([r for r in run.records if id(r.layer) in enc])

        assert grad_check(obj, net.parameters()) < 1e-4


class TestVaeKl:
    def test_standard_normal(self):
        assert ob.vae_kl(*pair(np.zeros((3, 2)), np.zeros((3, 2)))).value == 0.0

    def test_unit_mean(self):
        assert ob.vae_kl(*pair([[1.0]], [[0.0]])).value == pytest.approx(0.5, abs=1e-15)

    @given(arrays(np.float64, (2, 3), elements=st.floats(-3, 3)),
           arrays(np.float64, (2, 3), elements=st.floats(-3, 3)))
    def test_nonnegative(self, mu, lv):
        assert ob.vae_kl(*pair(mu, lv)).value >= -1e-12


class TestCorrupt:
    def test_zero_strength_is_identity(self, rng):
        x = rng.random((4, 5))
        for spec in (ob.NoiseSpec("gaussian", sigma=0.0), ob.NoiseSpec("zero_mask", p=0.0),
                     ob.NoiseSpec("zero_one_mask", p=0.0), ob.NoiseSpec("cauchy", sigma=0.0)):
            assert_array_equal(ob.corrupt(x, spec, rng), x)

    def test_full_mask(self, rng):
        assert_array_equal(ob.corrupt(rng.random((3, 3)), ob.NoiseSpec("zero_mask", p=1.0), rng), 0)

    def test_mask_fraction(self):
        x = np.ones(1_000_000)
        out = ob.corrupt(x, ob.NoiseSpec("zero_mask", p=0.1), make_rng(5))
        assert 0.097 <= np.mean(out == 0) <= 0.103

    def test_zero_one_mask(self):
        x = np.full(200_000, 0.5)
        out = ob.corrupt(x, ob.NoiseSpec("zero_one_mask", p=0.2), make_rng(6))
        assert set(np.unique(out)) == {0.0, 0.5, 1.0}
        assert np.mean(out == 0) == pytest.approx(0.2, abs=0.006)
        assert np.mean(out == 1) == pytest.approx(0.2, abs=0.006)

    def test_gaussian_std(self):
        out = ob.corrupt(np.zeros(200_000), ob.NoiseSpec("gaussian", sigma=0.3), make_rng(8))
        assert out.std() == pytest.approx(0.3, rel=0.01)

    def test_cauchy_median(self):
        scale = 0.5
        out = ob.corrupt(np.zeros(1_000_000), ob.NoiseSpec("cauchy", sigma=scale), make_rng(9))
        assert abs(np.median(out)) <= 0.01 * scale

    def test_eval_mode_is_identity(self, rng):
        x = rng.random((3, 4))
        assert_array_equal(ob.corrupt(x, ob.NoiseSpec("gaussian", sigma=1.0), rng, EVAL), x)

    def test_invalid_specs(self):
        with pytest.raises(ContractError):
            ob.NoiseSpec("zero_mask", p=1.5)
        with pytest.raises(ContractError):
            ob.NoiseSpec("salt")
        with pytest.raises(ContractError):
            ob.Penalty("sparse_kl", 0.1, rho=1.0)
        with pytest.raises(ContractError):
            ob.Penalty("contractive", -1.0)
        with pytest.raises(ContractError):
            ob.ObjectiveSpec(class_weight=1.5)


class TestWeighted:
    def setup_method(self):
        self.net = dense_autoencoder(4, [3, 2], seed=2)
        r = make_rng(0)
        self.neg, self.pos = r.random((5, 4)), r.random((3, 4))

    def total(self, alpha, neg=True, pos=True):
        return ob.weighted_reconstruction(Tape(), self.neg if neg else None, self.pos if pos else None,
                                          alpha, self.net).value

    def test_alpha_one_uses_positives_only(self):
        assert self.total(1.0) == pytest.approx(self.total(1.0, neg=False))

    def test_alpha_zero_uses_negatives_only(self):
        assert self.total(0.0) == pytest.approx(self.total(0.0, pos=False))

    def test_alpha_half_is_half_the_plain_sum(self):
        plain = self.total(1.0, neg=False) + self.total(0.0, pos=False)
        assert self.total(0.5) == pytest.approx(0.5 * plain)

    def test_total_objective_class_weight(self):
        X = np.vstack([self.neg, self.pos])
        labels = np.r_[np.zeros(5), np.ones(3)]
        spec = ob.ObjectiveSpec("mse", class_weight=0.3)
        got = ob.total_objective(Tape(), X, spec, self.net.eval(), labels=labels).value
        assert got == pytest.approx(self.total(0.3))


class TestTotal:
    def setup_method(self):
        self.net = Network((6,), [Dense(4, "sigmoid"), Dense(4, "linear"), Sampling(), Dense(6, "sigmoid")], 3,
                           seed=1).eval()
        self.X = make_rng(1).random((5, 6))

    def value(self, spec):
        return ob.total_objective(Tape(), self.X, spec, self.net).value

    def test_no_penalty_equals_distance(self):
        out = self.net.predict(self.X)
        assert self.value(ob.ObjectiveSpec("mse")) == pytest.approx(np.mean((self.X - out) ** 2))

    def test_zero_weight_equals_omission(self):
        spec = ob.ObjectiveSpec("bce", (ob.Penalty("sparse_kl", 0.0, 0.1),))
        assert self.value(spec) == self.value(ob.ObjectiveSpec("bce"))

    def test_penalties_are_additive(self):
        a, b = 0.3, 2.0
        d = self.value(ob.ObjectiveSpec("bce"))
        r1 = self.value(ob.ObjectiveSpec("bce", (ob.Penalty("vae_kl", 1.0),))) - d
        r2 = self.value(ob.ObjectiveSpec("bce", (ob.Penalty("sparse_quadratic", 1.0, 0.2),))) - d
        both = self.value(ob.ObjectiveSpec("bce", (ob.Penalty("vae_kl", a), ob.Penalty("sparse_quadratic", b, 0.2))))
        assert both == pytest.approx(d + a * r1 + b * r2, rel=1e-12)

    def test_corruption_changes_input_not_target(self):
        net = dense_autoencoder(6, [3], seed=0).train()
        spec = ob.ObjectiveSpec("mse", corruption=ob.NoiseSpec("zero_mask", p=0.5))
        noisy = ob.corrupt(self.X, spec.corruption, make_rng(3))
        got = ob.total_objective(Tape(), self.X, spec, net, make_rng(3)).value
        assert got == pytest.approx(np.mean((self.X - net.predict(noisy)) ** 2))

    def test_vae_penalty_needs_sampler(self):
        net = dense_autoencoder(6, [3], seed=0)
        with pytest.raises(ContractError):
            ob.total_objective(Tape(), self.X, ob.ObjectiveSpec("mse", (ob.Penalty("vae_kl", 1.0),)), net)
