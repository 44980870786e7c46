"""Reconstruction-throughput and PRNG-backend benchmarks.

The worker pool splits chunk rows into fixed-size blocks, so the set of
matrix products performed is identical for any worker count and the
reconstructed buffers are bit-identical whether 1 or N workers run them.
"""
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _rngfill_py
from .generator import build_generator
from .reparam import generator_pass_flops

BLOCK_ROWS = 64

try:
    from . import _rngfill as _rngfill_c
except ImportError:
    _rngfill_c = None


def _gen_forward_np(gen, alphas):
    x = alphas
    n_layers = gen.config.n_layers
    for i, w in enumerate(gen.weights):
        x = x @ w
        if gen.config.use_bias:
            x = x + gen.biases[i]
        if i < n_layers - 1:
            x = np.sin(x) if gen.config.activation == "sine" else _act_np(x, gen.config.activation)
    return x


def _act_np(x, kind):
    from . import tensor as T

    return T.activation(T.Tensor(x), kind).data


def reconstruct_blocked(cm, workers=1, block=BLOCK_ROWS):
    """Numpy reconstruction with block-parallel chunk evaluation.

    Block boundaries are fixed, so outputs are bit-identical across worker
    counts. Returns a dict of layer name -> flat-or-shaped buffers matching
    ``reconstruct``.
    """
    gen = build_generator(cm.generator_config)
    alphas = cm.alphas
    n = alphas.shape[0]
    delta = np.empty((n, cm.generator_config.d))
    spans = [(s, min(s + block, n)) for s in range(0, n, block)]

    def run(span):
        lo, hi = span
        delta[lo:hi] = _gen_forward_np(gen, alphas[lo:hi])

    if workers <= 1:
        for span in spans:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))

    if cm.betas is not None:
        delta = delta * cm.betas[:, None]

    theta0 = cm.base_theta0()
    out = {}
    if cm.scope == "global":
        flat = delta.reshape(-1)
        offset = 0
        for layer in cm.compressed_layers:
            out[layer.name] = flat[offset : offset + layer.n_params].reshape(layer.shape) + theta0[layer.name]
            offset += layer.n_params
    else:
        row = 0
        for layer, plan in zip(cm.compressed_layers, cm.plans):
            rows = delta[row : row + plan.n_chunks]
            out[layer.name] = rows.reshape(-1)[: layer.n_params].reshape(layer.shape) + theta0[layer.name]
            row += plan.n_chunks
    for layer in cm.layers:
        if not layer.compressed:
            out[layer.name] = cm.uncompressed_values[layer.name].copy()
    return out


def analytic_reconstruction_flops(cm):
    """Exact FLOPs of one full reconstruction: generator passes plus amplitude multiplies."""
    per_pass = generator_pass_flops(cm.generator_config)
    return cm.total_chunks * (per_pass + cm.generator_config.d)


def bench_reconstruct(cm, workers=1, repeats=3):
    """Median wall time and derived throughput of full reconstructions."""
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        reconstruct_blocked(cm, workers=workers)
        times.append(time.perf_counter() - start)
    wall = float(np.median(times))
    flops = analytic_reconstruction_flops(cm)
    return {
        "workers": workers,
        "repeats": repeats,
        "wall_ms": wall * 1e3,
        "chunks_per_sec": cm.total_chunks / wall,
        "flops": flops,
        "flops_per_sec": flops / wall,
    }


def bench_prng_backends(n=2_000_000):
    """Fill-rate comparison of the compiled and pure-Python xoshiro kernels."""
    results = {}
    for name, module in (("cython", _rngfill_c), ("python", _rngfill_py)):
        if module is None:
            continue
        state = _rngfill_py.seed_state(7)
        out = np.empty(n)
        start = time.perf_counter()
        module.uniform_fill(state, out)
        elapsed = time.perf_counter() - start
        results[name] = {"draws": n, "seconds": elapsed, "draws_per_sec": n / elapsed}
    if "cython" in results and "python" in results:
        results["speedup"] = results["python"]["seconds"] / results["cython"]["seconds"]
    return results
