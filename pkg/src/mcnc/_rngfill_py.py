"""Pure-Python reference implementation of the seeded fill kernels.

Stream contract (shared with the Cython extension, which must produce
bit-identical output):

* a 64-bit seed is expanded by SplitMix64 into the 256-bit state of
  xoshiro256++;
* uniforms in [0, 1) are (next_u64 >> 11) * 2**-53;
* normals come from Box-Muller applied to consecutive uniform pairs
  (cos term first, sin term second; an odd-length request still consumes
  a full pair and discards the sin term).
"""
import math

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 2.0 ** -53


def splitmix64(x):
    """Advance SplitMix64 from state ``x``; returns (next_state, output)."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def seed_state(seed):
    """Expand a scalar seed into a 4-word xoshiro256++ state."""
    x = int(seed) & _MASK
    words = []
    for _ in range(4):
        x, out = splitmix64(x)
        words.append(out)
    return np.array(words, dtype=np.uint64)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def _next_u64(s):
    result = (_rotl((s[0] + s[3]) & _MASK, 23) + s[0]) & _MASK
    t = (s[1] << 17) & _MASK
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


def u64_fill(state, out):
    """Fill a uint64 array with raw xoshiro256++ words."""
    s = [int(w) for w in state]
    for i in range(out.shape[0]):
        out[i] = _next_u64(s)
    state[:] = s


def uniform_fill(state, out):
    """Fill ``out`` with uniforms in [0, 1); mutates ``state`` in place."""
    s = [int(w) for w in state]
    for i in range(out.shape[0]):
        out[i] = (_next_u64(s) >> 11) * _INV_2_53
    state[:] = s


def normal_fill(state, out):
    """Fill ``out`` with standard normals via Box-Muller pairs."""
    s = [int(w) for w in state]
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = (_next_u64(s) >> 11) * _INV_2_53
        u2 = (_next_u64(s) >> 11) * _INV_2_53
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        out[i] = r * math.cos(_TWO_PI * u2)
        if i + 1 < n:
            out[i + 1] = r * math.sin(_TWO_PI * u2)
        i += 2
    state[:] = s
