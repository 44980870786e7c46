"""Training loop, Adam, and evaluation for desk-scale MLP classifiers.

Supports two regimes: a plain uncompressed baseline, and the compressed
regime where every step reconstructs the layer weights from (alpha, beta)
through the frozen generator and backpropagates into the chunk
parameters.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .errors import ConfigError, DivergenceError, StructuralError
from .generator import GeneratorConfig, build_generator
from .reparam import CompressedModel, LayerInfo, plan_chunks, reconstruct, seeded_base
from .rng import derive_seed

DEFAULT_LR_SEARCH = (0.1, 0.01, 0.001)


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple  # e.g. (784, 256, 256, 10)
    hidden_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ConfigError(f"invalid MLP layer sizes {self.layer_sizes}")

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    def layer_infos(self, compress_weights=True, compress_biases=True):
        infos = []
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            infos.append(LayerInfo(f"fc{i}.weight", (fan_in, fan_out), compress_weights))
            infos.append(LayerInfo(f"fc{i}.bias", (fan_out,), compress_biases))
        return infos

    def to_meta(self):
        return {"arch": "mlp", "layer_sizes": list(self.layer_sizes), "hidden_activation": self.hidden_activation}

    @classmethod
    def from_meta(cls, meta):
        if meta.get("arch") != "mlp":
            raise StructuralError(f"unsupported architecture metadata {meta!r}")
        return cls(tuple(meta["layer_sizes"]), meta["hidden_activation"])

    @property
    def n_params(self):
        return sum(info.n_params for info in self.layer_infos())


@dataclass(frozen=True)
class McncSetting:
    """How to compress a target model: chunking plus generator choices."""

    k: int = 9
    d: int = 5000
    activation: str = "sine"
    input_frequency: float = 4.5
    init: str = "uniform"
    init_scale: float = 1.0
    hidden_widths: tuple = (1000, 1000)
    gen_seed: int = 0
    scope: str = "per_layer"
    compress_biases: bool = True

    @property
    def use_beta(self):
        # the linear (identity) generator folds the amplitude into an extra
        # input column instead of a separate per-chunk scalar
        return self.activation != "identity"

    @property
    def gen_k(self):
        return self.k if self.use_beta else self.k + 1

    def generator_config(self):
        return GeneratorConfig(
            seed=self.gen_seed,
            k=self.gen_k,
            d=self.d,
            hidden_widths=tuple(self.hidden_widths),
            activation=self.activation,
            input_frequency=self.input_frequency,
            init=self.init,
            init_scale=self.init_scale,
        )


@dataclass
class TrainConfig:
    lr: float = 0.01
    optimizer: str = "adam"
    epochs: int = 10
    batch_size: int = 256
    seed: int = 0
    lr_search: tuple = DEFAULT_LR_SEARCH
    plateau_patience: int = 4
    plateau_factor: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class TrainResult:
    model: object  # dict of arrays (uncompressed) or CompressedModel
    loss_curve: list
    test_accuracy: float | None
    lr: float


# -- Adam -----------------------------------------------------------------


def adam_init(param):
    return {"m": np.zeros_like(param), "v": np.zeros_like(param), "t": 0}


def adam_step(state, param, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place; returns the state."""
    if state["m"].shape != param.shape:
        raise StructuralError(f"Adam state shape {state['m'].shape} != param shape {param.shape}")
    state["t"] += 1
    state["m"] = beta1 * state["m"] + (1.0 - beta1) * grad
    state["v"] = beta2 * state["v"] + (1.0 - beta2) * grad * grad
    m_hat = state["m"] / (1.0 - beta1 ** state["t"])
    v_hat = state["v"] / (1.0 - beta2 ** state["t"])
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class _Optimizer:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.lr = cfg.lr
        self.states = {name: adam_init(p) for name, p in params.items()} if cfg.optimizer == "adam" else None

    def step(self, params, grads):
        for name, p in params.items():
            g = grads[name]
            if g is None:
                continue
            if self.states is None:
                p -= self.lr * g
            else:
                adam_step(
                    self.states[name], p, g, self.lr,
                    self.cfg.adam_beta1, self.cfg.adam_beta2, self.cfg.adam_eps,
                )


# -- model construction ---------------------------------------------------


def build_compressed_model(spec, mcnc, base_seed):
    """Zero-initialized compressed model for an MLP target (alpha=0, beta=1)."""
    infos = spec.layer_infos(compress_weights=True, compress_biases=mcnc.compress_biases)
    cfg = mcnc.generator_config()
    if mcnc.scope == "global":
        total = sum(i.n_params for i in infos if i.compressed)
        n_chunks = plan_chunks(total, cfg.d, cfg.k, "global").n_chunks
    else:
        n_chunks = sum(
            plan_chunks(i.n_params, cfg.d, cfg.k).n_chunks for i in infos if i.compressed
        )
    uncompressed = {i.name: np.zeros(i.shape) for i in infos if not i.compressed}
    return CompressedModel(
        generator_config=cfg,
        layers=infos,
        alphas=np.zeros((n_chunks, cfg.k)),
        betas=np.ones(n_chunks) if mcnc.use_beta else None,
        scope=mcnc.scope,
        base_seed=base_seed,
        uncompressed_values=uncompressed,
        model_meta=spec.to_meta(),
    )


def _mlp_logits(params, spec, x):
    """Tape forward through the MLP given per-layer weight Tensors."""
    h = x
    for i in range(spec.n_layers):
        h = h @ params[f"fc{i}.weight"] + params[f"fc{i}.bias"]
        if i < spec.n_layers - 1:
            h = T.activation(h, spec.hidden_activation)
    return h


def _mlp_logits_np(params, spec, x):
    h = x
    for i in range(spec.n_layers):
        h = h @ params[f"fc{i}.weight"] + params[f"fc{i}.bias"]
        if i < spec.n_layers - 1:
            h = T.activation(T.Tensor(h), spec.hidden_activation).data
    return h


# -- training -------------------------------------------------------------


def train(spec, mcnc, data, cfg, test_data=None, generator=None):
    """Mini-batch training; ``mcnc=None`` trains the uncompressed baseline.

    ``generator`` overrides the seed-built generator (used by the
    random-vs-trained ablation). Deterministic for a fixed (seed, config).
    Raises DivergenceError with the step index if the loss goes
    non-finite.
    """
    compressed = mcnc is not None
    if compressed:
        cm = build_compressed_model(spec, mcnc, base_seed=cfg.seed)
        gen = generator if generator is not None else build_generator(cm.generator_config)
        built_weights = [w.copy() for w in gen.weights]
        trainables = {"alphas": cm.alphas}
        if cm.betas is not None:
            trainables["betas"] = cm.betas
        trainables.update(cm.uncompressed_values)
    else:
        all_infos = spec.layer_infos()
        theta = seeded_base(cfg.seed, [replace(i, compressed=True) for i in all_infos])
        trainables = theta

    optimizer = _Optimizer(cfg, trainables)
    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, 7))
    loss_curve = []
    best_loss = math.inf
    stale_epochs = 0
    step = 0

    for _epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(data))
        epoch_losses = []
        for start in range(0, len(data), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = T.Tensor(data.inputs[idx])
            yb = data.labels[idx]

            if compressed:
                alpha_t = T.Tensor(cm.alphas, requires_grad=True)
                beta_t = T.Tensor(cm.betas, requires_grad=True) if cm.betas is not None else None
                params = reconstruct(cm, gen, alphas=alpha_t, betas=beta_t)
                extra = {
                    name: T.Tensor(arr, requires_grad=True)
                    for name, arr in cm.uncompressed_values.items()
                }
                params.update(extra)
            else:
                params = {name: T.Tensor(arr, requires_grad=True) for name, arr in trainables.items()}

            loss = T.softmax_cross_entropy(_mlp_logits(params, spec, xb), yb)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite training loss at step {step}", step=step)
            epoch_losses.append(value)
            T.backward(loss)

            if compressed:
                grads = {"alphas": alpha_t.grad}
                if beta_t is not None:
                    grads["betas"] = beta_t.grad
                grads.update({name: t.grad for name, t in extra.items()})
            else:
                grads = {name: t.grad for name, t in params.items()}
            optimizer.step(trainables, grads)
            step += 1

        mean_loss = float(np.mean(epoch_losses))
        loss_curve.append(mean_loss)
        if mean_loss < best_loss - 1e-6:
            best_loss = mean_loss
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= cfg.plateau_patience:
                optimizer.lr *= cfg.plateau_factor
                stale_epochs = 0

    if compressed:
        assert all(np.array_equal(w, b) for w, b in zip(gen.weights, built_weights)), "generator must stay frozen"
        model = cm
    else:
        model = trainables
    accuracy = evaluate(model, test_data, spec) if test_data is not None else None
    return TrainResult(model=model, loss_curve=loss_curve, test_accuracy=accuracy, lr=cfg.lr)


def evaluate(model, data, spec=None, batch_size=2000):
    """Argmax accuracy of a weight dict or CompressedModel on ``data``.

    A compressed model is reconstructed once and the buffers reused for
    every batch.
    """
    if isinstance(model, TrainResult):
        model = model.model
    if isinstance(model, CompressedModel):
        if spec is None:
            spec = MlpSpec.from_meta(model.model_meta)
        params = {name: t.data for name, t in reconstruct(model).items()}
    else:
        if spec is None:
            raise ConfigError("evaluating a raw weight dict requires the model spec")
        params = model
    expected = {i.name for i in spec.layer_infos()}
    if set(params) != expected:
        raise StructuralError(f"parameter names {sorted(params)} do not match spec layers {sorted(expected)}")

    correct = 0
    for start in range(0, len(data), batch_size):
        x = data.inputs[start : start + batch_size]
        logits = _mlp_logits_np(params, spec, x)
        correct += int((logits.argmax(axis=1) == data.labels[start : start + batch_size]).sum())
    return correct / len(data)
