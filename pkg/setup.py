import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are optional: without Cython the package installs with
# the pure numpy fallback selected at import time.
ext_modules = []
if cythonize is not None:
    native = Extension(
        "graspfind._kernels._native",
        sources=["src/graspfind/_kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off: keep float arithmetic identical to the numpy
        # fallback so both backends agree on oracle predicates.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([native], language_level=3)

setup(ext_modules=ext_modules)
