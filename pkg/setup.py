"""Builds the optional Cython convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/majorness/kernels/_convops.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.extra_compile_args = ["-O3"]
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"majorness: skipping compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
