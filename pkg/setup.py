"""Build hooks for the optional compiled kernels.

The package is fully functional without the extension: homfrac._kernels
falls back to the numpy implementation at import time.  The extension is
compiled with FP contraction disabled so both backends produce identical
floating-point results.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "homfrac._kernels._ckernels",
        ["src/homfrac/_kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except ImportError:
    pass

setup(ext_modules=ext_modules)
