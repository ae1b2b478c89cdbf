"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); compiling it accelerates the per-step policy
kernels that dominate sweep runtime.  Set SYNSTRESS_NO_EXT=1 to skip the
build entirely.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SYNSTRESS_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "synstress._kernels._core",
            ["src/synstress/_kernels/_core.pyx"],
            extra_compile_args=["-O3"],
        )
        ext.optional = True  # a failed build must not fail the install
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
