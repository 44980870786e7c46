"""Training loop, Adam oracle checks, evaluation semantics."""
import numpy as np
import pytest

from mcnc.data import make_synthetic
from mcnc.errors import ConfigError, DivergenceError, StructuralError
from mcnc.generator import build_generator
from mcnc.reparam import reconstruct
from mcnc.train import (
    McncSetting,
    MlpSpec,
    TrainConfig,
    TrainResult,
    adam_init,
    adam_step,
    build_compressed_model,
    evaluate,
    train,
)

SMALL_SPEC = MlpSpec((16, 12, 4))
SMALL_MCNC = McncSetting(k=3, d=50, hidden_widths=(20, 20))


@pytest.fixture(scope="module")
def blobs():
    return (
        make_synthetic(600, 16, 4, seed=0, split="train"),
        make_synthetic(200, 16, 4, seed=1, split="test"),
    )


class TestAdam:
    def test_zero_gradient_no_move(self):
        p = np.array([1.0, -2.0])
        state = adam_init(p)
        adam_step(state, p, np.zeros(2), lr=0.1)
        assert p.tolist() == [1.0, -2.0]
        assert state["t"] == 1

    def test_first_step_closed_form(self):
        # bias correction makes step 1 move by lr * g/(|g| + eps') exactly
        p = np.array([0.0])
        g = np.array([0.25])
        state = adam_init(p)
        adam_step(state, p, g, lr=0.01, eps=1e-8)
        m_hat = 0.1 * 0.25 / 0.1
        v_hat = 0.001 * 0.25**2 / 0.001
        expected = -0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert p[0] == pytest.approx(expected, rel=1e-12)

    def test_quadratic_bowl_convergence(self):
        p = np.array([5.0, -3.0])
        state = adam_init(p)
        for _ in range(500):
            adam_step(state, p, 2.0 * p, lr=0.05)
        assert np.linalg.norm(p) < 1e-3

    def test_state_shape_checked(self):
        with pytest.raises(StructuralError):
            adam_step(adam_init(np.zeros(3)), np.zeros(2), np.zeros(2), lr=0.1)


class TestMlpSpec:
    def test_layer_infos(self):
        infos = SMALL_SPEC.layer_infos()
        assert [(i.name, i.shape) for i in infos] == [
            ("fc0.weight", (16, 12)),
            ("fc0.bias", (12,)),
            ("fc1.weight", (12, 4)),
            ("fc1.bias", (4,)),
        ]
        assert SMALL_SPEC.n_params == 16 * 12 + 12 + 12 * 4 + 4

    def test_meta_round_trip(self):
        assert MlpSpec.from_meta(SMALL_SPEC.to_meta()) == SMALL_SPEC

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            MlpSpec((10,))


class TestMcncSetting:
    def test_identity_mode_folds_beta(self):
        setting = McncSetting(k=9, activation="identity")
        assert setting.use_beta is False
        assert setting.gen_k == 10

    def test_budget_parity_with_sine(self):
        # the linear mode trains the same count: n*(k+1) either way
        sine = McncSetting(k=9, d=5000)
        linear = McncSetting(k=9, d=5000, activation="identity")
        cm_s = build_compressed_model(MlpSpec((100, 50, 10)), sine, base_seed=0)
        cm_l = build_compressed_model(MlpSpec((100, 50, 10)), linear, base_seed=0)
        n_s = cm_s.alphas.size + cm_s.betas.size
        assert cm_l.betas is None
        assert cm_l.alphas.size == n_s


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(lr=-0.1)
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)
        with pytest.raises(ConfigError):
            TrainConfig(optimizer="rmsprop")


class TestCompressedTraining:
    def test_zero_lr_leaves_parameters(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.0, epochs=1, batch_size=64, seed=3)
        result = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg, test_data=test_data)
        cm = result.model
        assert np.array_equal(cm.alphas, np.zeros_like(cm.alphas))
        assert np.array_equal(cm.betas, np.ones_like(cm.betas))

    def test_deterministic_loss_curves(self, blobs):
        train_data, _ = blobs
        cfg = TrainConfig(lr=0.05, epochs=2, batch_size=64, seed=5)
        a = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg)
        b = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg)
        assert a.loss_curve == b.loss_curve

    def test_loss_decreases_and_beats_chance(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.2, epochs=12, batch_size=64, seed=0)
        result = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg, test_data=test_data)
        assert result.loss_curve[-1] < result.loss_curve[0]
        assert result.test_accuracy > 0.5  # 4 balanced separable classes

    def test_generator_stays_frozen(self, blobs):
        train_data, _ = blobs
        gen = build_generator(SMALL_MCNC.generator_config())
        before = [w.copy() for w in gen.weights]
        cfg = TrainConfig(lr=0.05, epochs=1, batch_size=64, seed=0)
        train(SMALL_SPEC, SMALL_MCNC, train_data, cfg, generator=gen)
        assert all(np.array_equal(a, b) for a, b in zip(gen.weights, before))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_step(self, blobs):
        # a step size past float range overflows the logits to non-finite
        train_data, _ = blobs
        cfg = TrainConfig(lr=1e200, epochs=3, batch_size=64, seed=0, optimizer="sgd")
        with pytest.raises(DivergenceError) as err:
            train(SMALL_SPEC, None, train_data, cfg)
        assert err.value.step >= 0

    def test_trainable_accounting_matches_plan(self, blobs):
        cm = build_compressed_model(SMALL_SPEC, SMALL_MCNC, base_seed=0)
        from mcnc.reparam import plan_chunks

        expected = sum(
            plan_chunks(i.n_params, SMALL_MCNC.d, SMALL_MCNC.k).n_chunks
            for i in SMALL_SPEC.layer_infos()
        )
        assert cm.alphas.shape == (expected, SMALL_MCNC.k)
        assert cm.betas.shape == (expected,)

    def test_identity_activation_trains(self, blobs):
        train_data, _ = blobs
        mcnc = McncSetting(k=3, d=50, activation="identity", hidden_widths=(20, 20))
        cfg = TrainConfig(lr=0.05, epochs=2, batch_size=64, seed=0)
        result = train(SMALL_SPEC, mcnc, train_data, cfg)
        assert result.model.betas is None
        assert result.loss_curve[-1] < result.loss_curve[0]


class TestUncompressedTraining:
    def test_baseline_learns_blobs(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.005, epochs=10, batch_size=64, seed=0)
        result = train(SMALL_SPEC, None, train_data, cfg, test_data=test_data)
        assert result.test_accuracy >= 0.95

    def test_zero_lr_baseline_unchanged(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.0, epochs=1, batch_size=64, seed=2)
        result = train(SMALL_SPEC, None, train_data, cfg, test_data=test_data)
        from mcnc.reparam import seeded_base
        from dataclasses import replace

        theta = seeded_base(2, [replace(i, compressed=True) for i in SMALL_SPEC.layer_infos()])
        for name, arr in theta.items():
            assert np.array_equal(result.model[name], arr)


@pytest.mark.slow
def test_uncompressed_mnist_baseline(mnist_dir):
    from mcnc.data import mnist_from_dir

    train_data = mnist_from_dir(mnist_dir, "train")
    test_data = mnist_from_dir(mnist_dir, "test")
    spec = MlpSpec((784, 256, 256, 10))
    cfg = TrainConfig(lr=0.001, epochs=6, batch_size=128, seed=0)
    result = train(spec, None, train_data, cfg, test_data=test_data)
    assert result.test_accuracy >= 0.97


class TestEvaluate:
    def test_reconstructed_equals_on_the_fly(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.05, epochs=2, batch_size=64, seed=1)
        result = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg, test_data=test_data)
        cm = result.model
        frozen = {name: t.data for name, t in reconstruct(cm).items()}
        assert evaluate(frozen, test_data, SMALL_SPEC) == result.test_accuracy

    def test_constant_logits_hit_majority_prior(self, blobs):
        _, test_data = blobs
        # biases steer every logit to class 2; weights zero
        params = {
            "fc0.weight": np.zeros((16, 12)),
            "fc0.bias": np.zeros(12),
            "fc1.weight": np.zeros((12, 4)),
            "fc1.bias": np.array([0.0, 0.0, 5.0, 0.0]),
        }
        acc = evaluate(params, test_data, SMALL_SPEC)
        assert acc == np.mean(test_data.labels == 2)

    def test_memorizer_is_perfect(self):
        data = make_synthetic(50, 4, 2, seed=9)
        spec = MlpSpec((4, 8, 2))
        cfg = TrainConfig(lr=0.01, epochs=200, batch_size=50, seed=0)
        result = train(spec, None, data, cfg, test_data=data)
        assert result.test_accuracy == 1.0

    def test_name_mismatch_rejected(self, blobs):
        _, test_data = blobs
        with pytest.raises(StructuralError):
            evaluate({"oops": np.zeros(3)}, test_data, SMALL_SPEC)

    def test_raw_dict_requires_spec(self, blobs):
        _, test_data = blobs
        with pytest.raises(ConfigError):
            evaluate({"fc0.weight": np.zeros((16, 12))}, test_data)

    def test_accepts_train_result(self, blobs):
        train_data, test_data = blobs
        cfg = TrainConfig(lr=0.05, epochs=1, batch_size=64, seed=1)
        result = train(SMALL_SPEC, SMALL_MCNC, train_data, cfg, test_data=test_data)
        assert isinstance(result, TrainResult)
        assert evaluate(result, test_data) == result.test_accuracy
