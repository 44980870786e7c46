"""Generator build determinism, init statistics, forward pass, normalization."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcnc import tensor as T
from mcnc.errors import ConfigError, DegenerateInputError, ShapeError
from mcnc.generator import (
    GeneratorConfig,
    build_generator,
    gen_forward,
    normalize_rows,
    unfrozen_copy,
)

SMALL = GeneratorConfig(seed=3, k=4, d=20, hidden_widths=(16, 16))


class TestConfig:
    def test_defaults_match_recommended(self):
        cfg = GeneratorConfig(seed=0, k=9, d=5000)
        assert cfg.hidden_widths == (1000, 1000)
        assert cfg.activation == "sine"
        assert cfg.input_frequency == 4.5
        assert cfg.init == "uniform" and cfg.init_scale == 1.0
        assert cfg.use_bias is False

    def test_layer_dims(self):
        assert SMALL.layer_dims == ((4, 16), (16, 16), (16, 20))
        assert SMALL.n_layers == 3

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0},
            {"d": 0},
            {"hidden_widths": (16, 0)},
            {"input_frequency": 0.0},
            {"init_scale": -1.0},
            {"init": "orthogonal"},
            {"activation": "tanh"},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        base = dict(seed=0, k=4, d=20)
        with pytest.raises(ConfigError):
            GeneratorConfig(**{**base, **kwargs})

    def test_dict_round_trip(self):
        assert GeneratorConfig.from_dict(SMALL.to_dict()) == SMALL


class TestBuild:
    def test_same_seed_bit_identical(self):
        a = build_generator(GeneratorConfig(seed=7, k=3, d=11, hidden_widths=(8,)))
        b = build_generator(GeneratorConfig(seed=7, k=3, d=11, hidden_widths=(8,)))
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))

    def test_different_seeds_differ(self):
        a = build_generator(SMALL)
        b = build_generator(GeneratorConfig(seed=4, k=4, d=20, hidden_widths=(16, 16)))
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_uniform_init_range_and_mean(self):
        # fan-in 1000, c=1: pre-frequency entries in (-0.001, 0.001) with
        # mean |.| = half-width / 2 (mean of |U(-a, a)| is a/2)
        cfg = GeneratorConfig(seed=5, k=1000, d=10, hidden_widths=(1000,), input_frequency=1.0)
        w = build_generator(cfg).weights[0]
        assert w.size == 10**6
        assert np.all(np.abs(w) < 0.001)
        assert abs(np.mean(np.abs(w)) - 0.0005) < 0.1 * 0.0005

    def test_frequency_absorbed_into_first_layer(self):
        base = GeneratorConfig(seed=9, k=4, d=8, hidden_widths=(6,), input_frequency=1.0)
        scaled = GeneratorConfig(seed=9, k=4, d=8, hidden_widths=(6,), input_frequency=4.5)
        gb, gs = build_generator(base), build_generator(scaled)
        assert np.allclose(gs.weights[0], 4.5 * gb.weights[0], rtol=1e-15)
        assert np.array_equal(gs.weights[1], gb.weights[1])

    def test_init_scale_skips_first_layer(self):
        base = GeneratorConfig(seed=9, k=4, d=8, hidden_widths=(6,), init_scale=1.0)
        wide = GeneratorConfig(seed=9, k=4, d=8, hidden_widths=(6,), init_scale=2.0)
        gb, gw = build_generator(base), build_generator(wide)
        assert np.array_equal(gw.weights[0], gb.weights[0])
        assert np.allclose(gw.weights[1], 2.0 * gb.weights[1], rtol=1e-15)

    def test_normal_init_std(self):
        cfg = GeneratorConfig(seed=2, k=500, d=10, hidden_widths=(500,), init="normal", input_frequency=1.0)
        w = build_generator(cfg).weights[1]  # fan-in 500, sigma = 1/500
        assert abs(w.std() - 1.0 / 500) < 0.05 / 500

    def test_bias_buffers(self):
        cfg = GeneratorConfig(seed=1, k=2, d=3, hidden_widths=(4,), use_bias=True)
        gen = build_generator(cfg)
        assert [b.shape for b in gen.biases] == [(4,), (3,)]
        assert build_generator(SMALL).biases == []


class TestForward:
    def test_zero_input_maps_to_zero(self):
        out = gen_forward(build_generator(SMALL), T.Tensor(np.zeros((1, 4))))
        assert np.array_equal(out.data, np.zeros((1, 20)))

    def test_single_linear_layer_oracle(self):
        # k=1, d=1, no hidden layers: forward(a) = f * w * a exactly
        cfg = GeneratorConfig(seed=11, k=1, d=1, hidden_widths=(), input_frequency=3.0)
        gen = build_generator(cfg)
        w = gen.weights[0][0, 0]
        a = np.array([[0.7]])
        out = gen_forward(gen, T.Tensor(a))
        assert out.data[0, 0] == pytest.approx(w * 0.7, rel=1e-15)
        # and the stored weight already carries the frequency
        unit = GeneratorConfig(seed=11, k=1, d=1, hidden_widths=(), input_frequency=1.0)
        assert w == pytest.approx(3.0 * build_generator(unit).weights[0][0, 0], rel=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            gen_forward(build_generator(SMALL), T.Tensor(np.zeros((2, 5))))

    def test_hidden_activations_bounded_output(self):
        # sine hidden layers keep activations in [-1, 1], so outputs are
        # bounded by the column-wise absolute sum of the final weights
        gen = build_generator(SMALL)
        out = gen_forward(gen, T.Tensor(np.random.default_rng(0).normal(size=(64, 4)) * 50))
        bound = np.abs(gen.weights[-1]).sum(axis=0)
        assert np.all(np.abs(out.data) <= bound + 1e-12)

    @given(st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_gradient_vs_finite_differences(self, seed):
        gen = build_generator(GeneratorConfig(seed=seed, k=3, d=7, hidden_widths=(10,)))
        x = T.Tensor(np.random.default_rng(seed).normal(size=(2, 3)))
        assert T.finite_difference_check(lambda t: gen_forward(gen, t).sum(), x) <= 1e-6

    def test_weights_never_accumulate_gradients(self):
        gen = build_generator(SMALL)
        out = gen_forward(gen, T.Tensor(np.ones((1, 4)), requires_grad=True))
        T.backward(out.sum())
        assert all(wt.grad is None for wt in gen._weight_tensors)


class TestNormalizeRows:
    def test_3_4_5_triangle(self):
        assert normalize_rows(T.Tensor([[3.0, 4.0]])).data.tolist() == [[0.6, 0.8]]

    def test_axis_vector(self):
        assert normalize_rows(T.Tensor([[0.0, 0.0, 5.0]])).data.tolist() == [[0.0, 0.0, 1.0]]

    def test_unit_norms_at_scale(self):
        x = np.random.default_rng(1).normal(size=(10_000, 6))
        norms = np.linalg.norm(normalize_rows(T.Tensor(x)).data, axis=1)
        assert np.max(np.abs(norms - 1.0)) <= 1e-12

    def test_zero_row_names_index(self):
        x = np.ones((3, 2))
        x[1] = 0.0
        with pytest.raises(DegenerateInputError, match="index 1"):
            normalize_rows(T.Tensor(x))

    def test_gradient_vs_finite_differences(self):
        x = T.Tensor(np.random.default_rng(3).normal(size=(4, 5)) + 2.0)
        err = T.finite_difference_check(lambda t: (normalize_rows(t) * t).sum(), x)
        assert err <= 1e-6


def test_unfrozen_copy_is_independent():
    gen = build_generator(SMALL)
    copy = unfrozen_copy(gen)
    assert copy.frozen is False
    copy.weights[0][:] = 0.0
    assert not np.array_equal(gen.weights[0], copy.weights[0])
