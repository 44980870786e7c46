"""Chunked reparameterization of target-model parameters.

Each compressed layer's flat parameter vector is cut into chunks of the
generator's output size d; chunk i is reconstructed as
theta0 + beta_i * phi(alpha_i). The last chunk of a layer may generate a
few values past the end of the layer; those are produced and discarded.
Also houses LoRA factor shapes and the exact reconstruction-FLOPs
accounting.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, StructuralError
from .generator import GeneratorConfig, build_generator, gen_forward
from .rng import Xoshiro256pp, derive_seed

SCOPES = ("per_layer", "global")


@dataclass(frozen=True)
class ChunkPlan:
    total_params: int
    chunk_size: int
    n_chunks: int
    tail_waste: int
    scope: str
    k: int

    @property
    def trainable_count(self):
        # one alpha row of k values plus one beta per chunk; in the
        # amplitude-as-extra-input (linear) mode the k already includes the
        # extra column and no beta exists, so the count is identical
        return self.n_chunks * (self.k + 1)


def plan_chunks(total_params, chunk_size, k, scope="per_layer"):
    if total_params < 1:
        raise ConfigError(f"cannot plan chunks for {total_params} parameters")
    if chunk_size < 1:
        raise ConfigError(f"chunk size must be >= 1, got {chunk_size}")
    if scope not in SCOPES:
        raise ConfigError(f"scope must be one of {SCOPES}, got {scope!r}")
    n_chunks = math.ceil(total_params / chunk_size)
    return ChunkPlan(
        total_params=total_params,
        chunk_size=chunk_size,
        n_chunks=n_chunks,
        tail_waste=n_chunks * chunk_size - total_params,
        scope=scope,
        k=k,
    )


@dataclass(frozen=True)
class LayerInfo:
    name: str
    shape: tuple
    compressed: bool = True

    @property
    def n_params(self):
        return int(np.prod(self.shape))


@dataclass
class CompressedModel:
    """The in-memory compressed artifact: seed-or-buffers base plus (alpha, beta).

    ``betas`` is None in the linear-activation mode, where the amplitude is
    folded into an extra generator input column. ``base_seed`` and
    ``base_buffers`` are mutually exclusive ways to define theta0 for the
    compressed layers; values of uncompressed layers are always carried
    explicitly in ``uncompressed_values``.
    """

    generator_config: GeneratorConfig
    layers: list
    alphas: np.ndarray
    betas: np.ndarray | None = None
    scope: str = "per_layer"
    base_seed: int | None = None
    base_buffers: dict | None = None
    uncompressed_values: dict = field(default_factory=dict)
    model_meta: dict = field(default_factory=dict)  # task-architecture hints for evaluation

    def __post_init__(self):
        self.alphas = np.ascontiguousarray(self.alphas, dtype=np.float64)
        if self.betas is not None:
            self.betas = np.ascontiguousarray(self.betas, dtype=np.float64).reshape(-1)
        if self.scope not in SCOPES:
            raise ConfigError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if (self.base_seed is None) == (self.base_buffers is None):
            raise StructuralError("exactly one of base_seed / base_buffers must be set")
        if self.alphas.ndim != 2 or self.alphas.shape[1] != self.generator_config.k:
            raise StructuralError(
                f"alphas shape {self.alphas.shape} does not match generator input dim {self.generator_config.k}"
            )
        expected = self.total_chunks
        if self.alphas.shape[0] != expected:
            raise StructuralError(f"alphas row count {self.alphas.shape[0]} != planned chunk count {expected}")
        if self.betas is not None and self.betas.shape[0] != expected:
            raise StructuralError(f"betas length {self.betas.shape[0]} != planned chunk count {expected}")
        for layer in self.layers:
            if not layer.compressed and layer.name not in self.uncompressed_values:
                raise StructuralError(f"uncompressed layer {layer.name!r} has no stored values")

    @property
    def compressed_layers(self):
        return [l for l in self.layers if l.compressed]

    @property
    def plans(self):
        """ChunkPlan per compressed layer (per_layer) or a single global plan."""
        cfg = self.generator_config
        if self.scope == "global":
            total = sum(l.n_params for l in self.compressed_layers)
            return [plan_chunks(total, cfg.d, cfg.k, "global")]
        return [plan_chunks(l.n_params, cfg.d, cfg.k, "per_layer") for l in self.compressed_layers]

    @property
    def total_chunks(self):
        return sum(p.n_chunks for p in self.plans)

    def base_theta0(self):
        """theta0 buffers for the compressed layers, keyed by layer name."""
        if self.base_buffers is not None:
            missing = [l.name for l in self.compressed_layers if l.name not in self.base_buffers]
            if missing:
                raise StructuralError(f"embedded base is missing buffers for {missing}")
            return {l.name: self.base_buffers[l.name] for l in self.compressed_layers}
        return seeded_base(self.base_seed, self.layers)


def seeded_base(base_seed, layers):
    """Deterministic theta0 for compressed layers from a scalar seed.

    One stream, layers in table order: matrices (ndim >= 2) are drawn from
    U(-a, a) with a = 1/sqrt(fan_in) where fan_in is the first extent;
    vectors (biases) start at zero and consume no draws.
    """
    rng = Xoshiro256pp(derive_seed(base_seed, 0))
    out = {}
    for layer in layers:
        if not layer.compressed:
            continue
        shape = tuple(layer.shape)
        if len(shape) >= 2:
            a = 1.0 / math.sqrt(shape[0])
            out[layer.name] = (2.0 * rng.uniform(int(np.prod(shape))) - 1.0).reshape(shape) * a
        else:
            out[layer.name] = np.zeros(shape)
    return out


def reconstruct(cm, gen=None, alphas=None, betas=None):
    """Rebuild full per-layer parameter Tensors from the compressed form.

    ``alphas``/``betas`` default to the stored arrays; pass requires-grad
    Tensors to make the result differentiable for training. Returns a dict
    of layer name -> Tensor shaped like the layer; uncompressed layers come
    back as constants wrapping their stored values.
    """
    cfg = cm.generator_config
    if gen is None:
        gen = build_generator(cfg)
    elif gen.config != cfg:
        raise StructuralError("generator config does not match the compressed model")
    if alphas is None:
        alphas = T.Tensor(cm.alphas)
    if betas is None and cm.betas is not None:
        betas = T.Tensor(cm.betas)
    if alphas.shape != (cm.total_chunks, cfg.k):
        raise StructuralError(f"alphas shape {alphas.shape} != expected {(cm.total_chunks, cfg.k)}")

    delta = gen_forward(gen, alphas)
    if betas is not None:
        delta = delta * betas.reshape(-1, 1)

    theta0 = cm.base_theta0()
    out = {}
    if cm.scope == "global":
        total = sum(l.n_params for l in cm.compressed_layers)
        flat = delta.reshape(-1)[:total]
        offset = 0
        for layer in cm.compressed_layers:
            seg = flat[offset : offset + layer.n_params]
            out[layer.name] = seg.reshape(layer.shape) + T.Tensor(theta0[layer.name])
            offset += layer.n_params
    else:
        row = 0
        for layer, plan in zip(cm.compressed_layers, cm.plans):
            rows = delta[row : row + plan.n_chunks]
            flat = rows.reshape(-1)[: layer.n_params]
            out[layer.name] = flat.reshape(layer.shape) + T.Tensor(theta0[layer.name])
            row += plan.n_chunks

    for layer in cm.layers:
        if not layer.compressed:
            out[layer.name] = T.Tensor(cm.uncompressed_values[layer.name])
    return out


# -- LoRA -----------------------------------------------------------------


@dataclass(frozen=True)
class LoraSpec:
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError(f"LoRA rank must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class LoraFactors:
    base_shape: tuple
    a_shape: tuple
    b_shape: tuple

    @property
    def param_count(self):
        return int(np.prod(self.a_shape)) + int(np.prod(self.b_shape))

    def layers(self, name, compressed=True):
        """Factor layer-table entries ready to register on a CompressedModel."""
        return [
            LayerInfo(f"{name}.lora_a", self.a_shape, compressed),
            LayerInfo(f"{name}.lora_b", self.b_shape, compressed),
        ]


def wrap_lora(shape, spec):
    """Factor shapes for a dense or conv layer under rank-``spec.rank`` LoRA.

    Dense (m, n) factors as (m, r) x (r, n). A conv kernel
    (out_c, in_c, ksize, ksize) is first reshaped to
    (ksize * in_c, ksize * out_c) and then factored the same way.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 2:
        rows, cols = shape
    elif len(shape) == 4:
        out_c, in_c, kh, kw = shape
        if kh != kw:
            raise ConfigError(f"only square conv kernels are supported, got {shape}")
        rows, cols = kh * in_c, kh * out_c
    else:
        raise ConfigError(f"LoRA target must be 2-D or 4-D, got shape {shape}")
    if spec.rank > min(rows, cols):
        raise ConfigError(f"LoRA rank {spec.rank} exceeds min dimension {min(rows, cols)} of reshaped {rows}x{cols}")
    return LoraFactors(base_shape=shape, a_shape=(rows, spec.rank), b_shape=(spec.rank, cols))


def lora_effective_weight(theta0, a, b):
    """theta0 + A @ B, reshaped back to the base layer's shape (differentiable)."""
    prod = a @ b
    base = theta0 if isinstance(theta0, T.Tensor) else T.Tensor(theta0)
    if prod.size != base.size:
        raise StructuralError(f"factor product size {prod.size} != base size {base.size}")
    return prod.reshape(base.shape) + base


# -- FLOPs accounting -----------------------------------------------------


def generator_pass_flops(cfg):
    """Multiply-add count of one generator forward pass (exact)."""
    widths = (cfg.k, *cfg.hidden_widths, cfg.d)
    return 2 * sum(a * b for a, b in zip(widths[:-1], widths[1:]))


def reconstruction_flops(gen_config, shapes, method="mcnc", n_bases=None):
    """Exact integer FLOPs to regenerate the given matrices on the fly.

    ``shapes`` is an iterable of (rows, cols, count). MCNC: ceil(E/d)
    generator passes per matrix plus one amplitude multiply per generated
    value; NOLA: 2 * n_bases * E per matrix.
    """
    total = 0
    for rows, cols, count in shapes:
        total += count * _matrix_flops(gen_config, rows, cols, method, n_bases)
    return total


def _matrix_flops(gen_config, rows, cols, method, n_bases):
    entries = rows * cols
    if entries < 1:
        raise ConfigError("matrix shapes must be nonempty")
    if method == "mcnc":
        passes = math.ceil(entries / gen_config.d)
        return passes * generator_pass_flops(gen_config) + passes * gen_config.d
    if method == "nola":
        if not n_bases or n_bases < 1:
            raise ConfigError("NOLA accounting requires a positive n_bases")
        return 2 * n_bases * entries
    raise ConfigError(f"unknown FLOPs method {method!r}")


def paper_style_gflops(gen_config, shapes, method="mcnc", n_bases=None):
    """GFLOPs with per-matrix-shape values rounded to hundredths of a MFLOP.

    Published adapter-reconstruction totals round each distinct matrix
    shape's cost to 2 decimal MFLOPs before aggregating; exact integer
    totals can differ in the last printed digit, so reporting follows the
    same convention.
    """
    total_mflops = 0.0
    for rows, cols, count in shapes:
        per = round(_matrix_flops(gen_config, rows, cols, method, n_bases) / 1e6, 2)
        total_mflops += count * per
    return round(total_mflops / 1e3, 2)


#: generator used by the published adapter-reconstruction accounting
ADAPTER_GEN_CONFIG = GeneratorConfig(seed=0, k=5, d=5000, hidden_widths=(32, 32))

#: LoRA factor matrices of LLaMA-2 7B (32 blocks: 4 square attention
#: projections and 3 MLP projections, rank 8) and 13B (40 blocks, rank 16)
LLAMA_7B_SHAPES = ((4096, 8, 32 * 11), (11008, 8, 32 * 3))
LLAMA_13B_SHAPES = ((5120, 16, 40 * 11), (13824, 16, 40 * 3))
LLAMA_7B_NOLA_BASES = 64
LLAMA_13B_NOLA_BASES = 140

SHAPE_PRESETS = {
    "llama7b": (LLAMA_7B_SHAPES, LLAMA_7B_NOLA_BASES),
    "llama13b": (LLAMA_13B_SHAPES, LLAMA_13B_NOLA_BASES),
}


def compression_report(cm, stored_bytes=None):
    """Trainable-parameter accounting and size of a compressed model.

    The percentage denominator counts only compressible parameters;
    uncompressed layers (norms, base biases, ...) are reported separately.
    """
    compressible = sum(l.n_params for l in cm.compressed_layers)
    trainable = cm.alphas.size + (cm.betas.size if cm.betas is not None else 0)
    uncompressed = sum(l.n_params for l in cm.layers if not l.compressed)
    if stored_bytes is None:
        stored_bytes = 4 * trainable
    return {
        "trainable_params": trainable + uncompressed,
        "compressed_trainable": trainable,
        "uncompressed_params": uncompressed,
        "compressible_params": compressible,
        "percentage": 100.0 * trainable / compressible,
        "stored_bytes": int(stored_bytes),
        "n_chunks": cm.total_chunks,
    }
