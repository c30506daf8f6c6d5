"""Build the optional compiled kernels.

The package works without them: ``cranzf.kernels`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("CRANZF_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "cranzf._ckernels",
                ["src/cranzf/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
