"""Blocked reconstruction determinism and the backend/throughput benchmarks."""
import numpy as np
import pytest

from mcnc.bench import (
    BLOCK_ROWS,
    analytic_reconstruction_flops,
    bench_prng_backends,
    bench_reconstruct,
    reconstruct_blocked,
)
from mcnc.generator import GeneratorConfig
from mcnc.reparam import (
    ADAPTER_GEN_CONFIG,
    LLAMA_7B_SHAPES,
    CompressedModel,
    LayerInfo,
    generator_pass_flops,
    reconstruct,
    reconstruction_flops,
)

try:
    from mcnc import _rngfill as _rngfill_c
except ImportError:
    _rngfill_c = None


def model_with_chunks(n_layers=3, rows=40, cols=30, d=180, k=4):
    cfg = GeneratorConfig(seed=2, k=k, d=d, hidden_widths=(24, 24))
    layers = [LayerInfo(f"w{i}", (rows, cols)) for i in range(n_layers)]
    n = sum(-(-rows * cols // d) for _ in range(n_layers))
    rng = np.random.default_rng(0)
    return CompressedModel(
        generator_config=cfg,
        layers=layers,
        alphas=rng.normal(size=(n, k)),
        betas=rng.normal(size=n),
        base_seed=11,
    )


class TestBlockedReconstruction:
    def test_matches_reference_reconstruct(self):
        cm = model_with_chunks()
        blocked = reconstruct_blocked(cm, workers=1)
        reference = reconstruct(cm)
        for name, tensor in reference.items():
            assert np.allclose(blocked[name], tensor.data, atol=1e-12)

    def test_workers_bit_identical(self):
        cm = model_with_chunks(n_layers=8)
        one = reconstruct_blocked(cm, workers=1)
        four = reconstruct_blocked(cm, workers=4)
        for name in one:
            assert np.array_equal(one[name], four[name])

    def test_block_size_does_not_change_output(self):
        cm = model_with_chunks(n_layers=8)
        a = reconstruct_blocked(cm, workers=2, block=3)
        b = reconstruct_blocked(cm, workers=3, block=BLOCK_ROWS)
        for name in a:
            assert np.array_equal(a[name], b[name])

    def test_global_scope(self):
        cfg = GeneratorConfig(seed=2, k=4, d=180, hidden_widths=(24, 24))
        layers = [LayerInfo("w0", (40, 30)), LayerInfo("w1", (40, 30))]
        n = -(-2400 // 180)
        rng = np.random.default_rng(1)
        cm = CompressedModel(
            generator_config=cfg,
            layers=layers,
            alphas=rng.normal(size=(n, 4)),
            betas=rng.normal(size=n),
            scope="global",
            base_seed=3,
        )
        blocked = reconstruct_blocked(cm, workers=2)
        reference = reconstruct(cm)
        for name, tensor in reference.items():
            assert np.allclose(blocked[name], tensor.data, atol=1e-12)


class TestAnalyticFlops:
    def test_matches_reconstruction_flops(self):
        cm = model_with_chunks()
        # one (rows*cols) matrix per layer, same generator
        expected = reconstruction_flops(cm.generator_config, [(40, 30, 3)])
        assert analytic_reconstruction_flops(cm) == expected

    def test_llama_7b_shaped_model(self):
        # chunk count for the 7B adapter stack implies the published total
        n_chunks = sum(-(-r * c // ADAPTER_GEN_CONFIG.d) * count for r, c, count in LLAMA_7B_SHAPES)
        cm_flops = n_chunks * (generator_pass_flops(ADAPTER_GEN_CONFIG) + ADAPTER_GEN_CONFIG.d)
        assert cm_flops == reconstruction_flops(ADAPTER_GEN_CONFIG, LLAMA_7B_SHAPES)


class TestBench:
    def test_reconstruct_stats(self):
        cm = model_with_chunks()
        stats = bench_reconstruct(cm, workers=1, repeats=2)
        assert stats["workers"] == 1 and stats["repeats"] == 2
        assert stats["wall_ms"] > 0
        assert stats["chunks_per_sec"] > 0
        assert stats["flops"] == analytic_reconstruction_flops(cm)
        assert stats["flops_per_sec"] == pytest.approx(stats["flops"] / (stats["wall_ms"] / 1e3))

    def test_prng_backend_comparison(self):
        results = bench_prng_backends(n=200_000)
        assert "python" in results
        assert results["python"]["draws_per_sec"] > 0
        if _rngfill_c is not None:
            assert "cython" in results
            assert results["speedup"] > 1.0  # compiled kernel must win
