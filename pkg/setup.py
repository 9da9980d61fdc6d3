"""Builds the optional Cython kernel extension.

The package works without it (pure-NumPy fallback); a failed extension
build should not block installation, so errors degrade to a warning.
"""

import warnings

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/wifield/specfun/_kernels.pyx",
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"Cython unavailable, building without compiled kernels: {exc}")
    ext_modules = []

setup(ext_modules=ext_modules)
