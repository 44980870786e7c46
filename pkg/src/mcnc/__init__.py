"""Manifold-constrained neural compression toolkit.

Reparameterizes model weights chunk-wise as theta0 + beta * phi(alpha)
through a frozen, seed-reconstructible sine generator, with
sphere-coverage diagnostics, exact reconstruction-FLOPs accounting, and a
compact binary model format.
"""
from .coverage import CoverageReport, coverage_report, sample_uniform_sphere, sliced_w2, train_generator_sw
from .data import Dataset, load_mnist_idx, make_synthetic
from .fileformat import load_compressed, save_compressed
from .generator import Generator, GeneratorConfig, build_generator, gen_forward, normalize_rows
from .reparam import (
    ChunkPlan,
    CompressedModel,
    LayerInfo,
    LoraSpec,
    compression_report,
    plan_chunks,
    reconstruct,
    reconstruction_flops,
    wrap_lora,
)
from .tensor import Tensor, backward, finite_difference_check, softmax_cross_entropy
from .train import McncSetting, MlpSpec, TrainConfig, adam_step, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "ChunkPlan",
    "CompressedModel",
    "CoverageReport",
    "Dataset",
    "Generator",
    "GeneratorConfig",
    "LayerInfo",
    "LoraSpec",
    "McncSetting",
    "MlpSpec",
    "Tensor",
    "TrainConfig",
    "adam_step",
    "backward",
    "build_generator",
    "compression_report",
    "coverage_report",
    "evaluate",
    "finite_difference_check",
    "gen_forward",
    "load_compressed",
    "load_mnist_idx",
    "make_synthetic",
    "normalize_rows",
    "plan_chunks",
    "reconstruct",
    "reconstruction_flops",
    "sample_uniform_sphere",
    "save_compressed",
    "sliced_w2",
    "softmax_cross_entropy",
    "train",
    "train_generator_sw",
    "wrap_lora",
]
