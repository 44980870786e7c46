"""The frozen seed-reconstructible generator: a sine MLP mapping R^k -> R^d.

A Generator is fully determined by its GeneratorConfig; rebuilding from the
same seed reproduces the weight buffers bit for bit, so a compressed model
only needs to store the scalar seed. Hidden layers apply the configured
activation; the output layer is linear. With no biases and sine hidden
activations the map sends the zero input to the zero vector exactly, which
is what makes zero-initialized chunk inputs start training at the base
weights.
"""
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, DegenerateInputError, ShapeError
from .rng import Xoshiro256pp

DEFAULT_HIDDEN_WIDTHS = (1000, 1000)
DEFAULT_INPUT_FREQUENCY = 4.5


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    k: int
    d: int
    hidden_widths: tuple = DEFAULT_HIDDEN_WIDTHS
    activation: str = "sine"
    input_frequency: float = DEFAULT_INPUT_FREQUENCY
    init: str = "uniform"
    init_scale: float = 1.0
    use_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.k < 1 or self.d < 1:
            raise ConfigError(f"input/output dims must be >= 1, got k={self.k}, d={self.d}")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden_widths}")
        if not self.input_frequency > 0:
            raise ConfigError(f"input frequency must be positive, got {self.input_frequency}")
        if not self.init_scale > 0:
            raise ConfigError(f"init scale must be positive, got {self.init_scale}")
        if self.init not in ("uniform", "normal"):
            raise ConfigError(f"init must be 'uniform' or 'normal', got {self.init!r}")
        if self.activation not in T.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self):
        """Fan-in/fan-out pairs, first layer to last."""
        dims = (self.k, *self.hidden_widths, self.d)
        return tuple(zip(dims[:-1], dims[1:]))

    @property
    def n_layers(self):
        return len(self.hidden_widths) + 1

    def to_dict(self):
        return {
            "seed": self.seed,
            "k": self.k,
            "d": self.d,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation,
            "input_frequency": self.input_frequency,
            "init": self.init,
            "init_scale": self.init_scale,
            "use_bias": self.use_bias,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            seed=int(obj["seed"]),
            k=int(obj["k"]),
            d=int(obj["d"]),
            hidden_widths=tuple(obj["hidden_widths"]),
            activation=obj["activation"],
            input_frequency=float(obj["input_frequency"]),
            init=obj["init"],
            init_scale=float(obj["init_scale"]),
            use_bias=bool(obj["use_bias"]),
        )


@dataclass
class Generator:
    config: GeneratorConfig
    weights: list
    biases: list  # empty unless config.use_bias
    frozen: bool = True

    def __post_init__(self):
        # constant graph nodes, shared across forward passes; they never
        # receive gradients so reuse is safe
        self._weight_tensors = [T.Tensor(w) for w in self.weights]
        self._bias_tensors = [T.Tensor(b) for b in self.biases]

    @property
    def k(self):
        return self.config.k

    @property
    def d(self):
        return self.config.d

    def with_weights(self, weights, frozen=False):
        """A copy carrying explicit (e.g. trained) weight buffers."""
        return Generator(self.config, [w.copy() for w in weights], [b.copy() for b in self.biases], frozen=frozen)


def build_generator(config):
    """Draw the frozen generator weights from the seeded stream.

    Layers are filled first to last, each matrix row-major, weights before
    biases. Uniform init is U(-c/n, c/n) and normal init is N(0, (c/n)^2)
    with n the layer fan-in; the variance scale c is pinned to 1 for the
    first layer, whose weights are instead multiplied by the input
    frequency after drawing.
    """
    rng = Xoshiro256pp(config.seed)
    weights = []
    biases = []
    for layer_index, (fan_in, fan_out) in enumerate(config.layer_dims):
        scale = 1.0 if layer_index == 0 else config.init_scale
        half_width = scale / fan_in
        count = fan_in * fan_out
        if config.init == "uniform":
            w = (2.0 * rng.uniform(count) - 1.0) * half_width
        else:
            w = rng.normal(count) * half_width
        w = w.reshape(fan_in, fan_out)
        if layer_index == 0:
            w *= config.input_frequency
        weights.append(w)
        if config.use_bias:
            if config.init == "uniform":
                b = (2.0 * rng.uniform(fan_out) - 1.0) * half_width
            else:
                b = rng.normal(fan_out) * half_width
            biases.append(b)
    return Generator(config, weights, biases)


def gen_forward(gen, alphas):
    """Batched forward pass: Tensor[B x k] -> Tensor[B x d].

    Differentiable w.r.t. ``alphas``; the generator weights are constants
    on the tape and never accumulate gradients.
    """
    x = alphas if isinstance(alphas, T.Tensor) else T.Tensor(alphas)
    if x.data.ndim != 2 or x.shape[1] != gen.k:
        raise ShapeError(f"alphas shape {x.shape} does not match generator input dim {gen.k}")
    n_layers = gen.config.n_layers
    for i, w in enumerate(gen._weight_tensors):
        x = x @ w
        if gen.config.use_bias:
            x = x + gen._bias_tensors[i]
        if i < n_layers - 1:  # output layer stays linear
            x = T.activation(x, gen.config.activation)
    return x


def normalize_rows(x):
    """Project each row of Tensor[B x d] onto the unit sphere (differentiable)."""
    x = x if isinstance(x, T.Tensor) else T.Tensor(x)
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    zero_rows = np.flatnonzero(norms.reshape(-1) == 0.0)
    if zero_rows.size:
        raise DegenerateInputError(f"cannot normalize zero-norm row at index {int(zero_rows[0])}")
    out_data = x.data / norms

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=1, keepdims=True)
            x._accumulate((g - out_data * inner) / norms)

    return T.from_op(out_data, (x,), backward_fn, op="normalize_rows")


def unfrozen_copy(gen):
    """Writable clone used by coverage-driven generator training."""
    return Generator(
        gen.config,
        [w.copy() for w in gen.weights],
        [b.copy() for b in gen.biases],
        frozen=False,
    )
