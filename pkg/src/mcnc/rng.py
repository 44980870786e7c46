"""Seeded, cross-platform-reproducible random streams.

The hot fill loops live in a compiled Cython extension when available;
otherwise a pure-Python twin of the same stream is used. Selection happens
once at import. Set MCNC_PURE_PYTHON=1 to force the fallback (used by the
backend-comparison benchmark and the equivalence tests).
"""
import os

import numpy as np

from . import _rngfill_py
from .errors import ConfigError

if os.environ.get("MCNC_PURE_PYTHON"):
    _kernels = _rngfill_py
    BACKEND = "python"
else:
    try:
        from . import _rngfill as _kernels

        BACKEND = "cython"
    except ImportError:  # extension not built
        _kernels = _rngfill_py
        BACKEND = "python"

splitmix64 = _rngfill_py.splitmix64
seed_state = _rngfill_py.seed_state

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = 0xFFFFFFFFFFFFFFFF


def derive_seed(seed, index):
    """Counter-derived child seed: the ``index``-th SplitMix64 output of ``seed``.

    Pure function of (seed, index), so parallel consumers can derive their
    streams independently without sharing state.
    """
    x = (int(seed) + int(index) * _GOLDEN) & _MASK
    _, out = splitmix64(x)
    return out


class Xoshiro256pp:
    """xoshiro256++ seeded through SplitMix64 expansion."""

    def __init__(self, seed):
        self.seed = int(seed) & _MASK
        self._state = seed_state(self.seed)

    def next_u64(self):
        out = np.empty(1, dtype=np.uint64)
        _kernels.u64_fill(self._state, out)
        return int(out[0])

    def raw(self, n):
        """``n`` raw 64-bit words."""
        out = np.empty(int(n), dtype=np.uint64)
        _kernels.u64_fill(self._state, out)
        return out

    def uniform(self, n):
        """``n`` doubles in [0, 1)."""
        out = np.empty(int(n), dtype=np.float64)
        _kernels.uniform_fill(self._state, out)
        return out

    def uniform_range(self, n, low, high):
        if not high > low:
            raise ConfigError(f"empty uniform range [{low}, {high})")
        return low + self.uniform(n) * (high - low)

    def normal(self, n):
        """``n`` standard normals (Box-Muller on consecutive uniform pairs)."""
        out = np.empty(int(n), dtype=np.float64)
        _kernels.normal_fill(self._state, out)
        return out
