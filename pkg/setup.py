"""Builds the optional Cython PRNG kernel.

The package works without it: mcnc.rng falls back to a pure-Python
implementation of the same stream when the extension is absent.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mcnc._rngfill",
                ["src/mcnc/_rngfill.pyx"],
                include_dirs=[numpy.get_include()],
                # keep Box-Muller bit-identical to the Python fallback: no
                # FMA contraction and no gcc sin+cos -> sincos() fusion
                extra_compile_args=["-ffp-contract=off", "-fno-builtin"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
