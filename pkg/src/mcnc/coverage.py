"""Sphere-coverage diagnostics for generators.

Quantifies how uniformly the normalized image of a generator covers the
unit sphere via a sliced 2-Wasserstein estimate against fresh uniform
sphere samples, summarized as exp(-tau * W2^2). Also provides
gradient-based generator training that minimizes the same sliced
objective.
"""
import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .errors import DataError, DegenerateInputError, DivergenceError
from .generator import gen_forward, normalize_rows, unfrozen_copy
from .rng import Xoshiro256pp, derive_seed

DEFAULT_TAU = 10.0
DEFAULT_N_SAMPLES = 10_000
DEFAULT_N_PROJECTIONS = 128

# fixed offsets for deriving independent child streams from one seed
_ALPHA_STREAM = 1
_SPHERE_STREAM = 2
_PROJECTION_STREAM = 3


@dataclass
class CoverageReport:
    swd: float
    uniformity_score: float
    tau: float
    n_samples: int
    n_projections: int
    seed: int

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def sample_uniform_sphere(n, d, seed):
    """n points uniform on S^{d-1}: normalized standard-normal rows."""
    rng = Xoshiro256pp(seed)
    x = rng.normal(n * d).reshape(n, d)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # a zero-norm gaussian row has probability 0; resample defensively
    while np.any(norms == 0.0):
        bad = np.flatnonzero(norms.reshape(-1) == 0.0)
        x[bad] = rng.normal(bad.size * d).reshape(bad.size, d)
        norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms


def projection_directions(n_projections, d, seed):
    """Deterministic unit projection directions, one independent stream each."""
    dirs = np.empty((n_projections, d))
    for j in range(n_projections):
        dirs[j] = sample_uniform_sphere(1, d, derive_seed(seed, j))[0]
    return dirs


def sliced_w2(a, b, n_projections=DEFAULT_N_PROJECTIONS, seed=0):
    """Sliced 2-Wasserstein distance between two equal-size point sets.

    Projects both sets onto ``n_projections`` uniform directions; each 1-D
    squared distance is the mean squared difference of sorted projections
    (the exact 1-D optimal transport); returns sqrt of the mean over
    directions. Deterministic given ``seed``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError(f"point sets must be 2-D with equal dimension, got {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise DataError(f"unequal sample counts {a.shape[0]} != {b.shape[0]}; no interpolation is attempted")
    dirs = projection_directions(n_projections, a.shape[1], seed)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.sqrt(np.mean((pa - pb) ** 2)))


def sw2_sq_loss(x, target, dirs):
    """Differentiable mean squared sliced-W2 between Tensor ``x`` and fixed ``target``.

    ``target`` and ``dirs`` are plain arrays (constants). Backward routes
    the sorted-matching residuals through the projection, using the fact
    that the sort permutation is locally constant.
    """
    proj = x.data @ dirs.T  # (n, J)
    order = np.argsort(proj, axis=0)
    pa = np.take_along_axis(proj, order, axis=0)
    pb = np.sort(target @ dirs.T, axis=0)
    resid = pa - pb
    n, n_proj = proj.shape
    loss = np.mean(resid**2)

    def backward_fn(g):
        if not x.requires_grad:
            return
        dproj = np.zeros_like(proj)
        np.put_along_axis(dproj, order, 2.0 * resid / (n * n_proj), axis=0)
        x._accumulate(np.asarray(g).item() * (dproj @ dirs))

    return T.from_op(loss, (x,), backward_fn, op="sw2_sq")


def coverage_report(
    gen,
    bound,
    n=DEFAULT_N_SAMPLES,
    n_projections=DEFAULT_N_PROJECTIONS,
    seed=0,
    tau=DEFAULT_TAU,
):
    """Estimate coverage of S^{d-1} by gen over inputs uniform in [-bound, bound]^k."""
    if not bound > 0:
        raise DegenerateInputError(f"input bound must be positive, got {bound} (all outputs would coincide)")
    rng = Xoshiro256pp(derive_seed(seed, _ALPHA_STREAM))
    alphas = rng.uniform_range(n * gen.k, -bound, bound).reshape(n, gen.k)
    outputs = gen_forward(gen, T.Tensor(alphas))
    points = normalize_rows(outputs).data
    reference = sample_uniform_sphere(n, gen.d, derive_seed(seed, _SPHERE_STREAM))
    swd = sliced_w2(points, reference, n_projections, derive_seed(seed, _PROJECTION_STREAM))
    return CoverageReport(
        swd=swd,
        uniformity_score=math.exp(-tau * swd * swd),
        tau=tau,
        n_samples=n,
        n_projections=n_projections,
        seed=seed,
    )


def write_point_cloud_csv(gen, bound, n, seed, path):
    """Sample normalized generator outputs (d=3) to a CSV of x,y,z rows."""
    if gen.d != 3:
        raise DataError(f"point-cloud export is for d=3 generators, got d={gen.d}")
    rng = Xoshiro256pp(derive_seed(seed, _ALPHA_STREAM))
    alphas = rng.uniform_range(n * gen.k, -bound, bound).reshape(n, gen.k)
    points = normalize_rows(gen_forward(gen, T.Tensor(alphas))).data
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        writer.writerows(points.tolist())


def train_generator_sw(gen, steps, batch, lr, bound, seed, n_projections=DEFAULT_N_PROJECTIONS):
    """Gradient-descent the generator weights on the sliced-W2 objective.

    Fresh uniform-sphere target batches and fresh projection directions are
    drawn each step. Returns a new (non-seed-reconstructible) Generator;
    the input generator is untouched.
    """
    trained = unfrozen_copy(gen)
    alpha_rng = Xoshiro256pp(derive_seed(seed, _ALPHA_STREAM))
    for step in range(steps):
        weight_tensors = [T.Tensor(w, requires_grad=True) for w in trained.weights]
        alphas = alpha_rng.uniform_range(batch * gen.k, -bound, bound).reshape(batch, gen.k)
        x = T.Tensor(alphas)
        for i, w in enumerate(weight_tensors):
            x = x @ w
            if gen.config.use_bias:
                x = x + T.Tensor(trained.biases[i])  # biases stay fixed
            if i < len(weight_tensors) - 1:
                x = T.activation(x, gen.config.activation)
        points = normalize_rows(x)
        target = sample_uniform_sphere(batch, gen.d, derive_seed(seed, 1000 + 2 * step))
        dirs = projection_directions(n_projections, gen.d, derive_seed(seed, 1001 + 2 * step))
        loss = sw2_sq_loss(points, target, dirs)
        if not np.isfinite(loss.item()):
            raise DivergenceError(f"non-finite sliced-W2 loss at step {step}", step=step)
        T.backward(loss)
        for w, wt in zip(trained.weights, weight_tensors):
            w -= lr * wt.grad
    return trained.with_weights(trained.weights)
