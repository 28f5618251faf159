import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("EARSHOT_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "earshot._kernels",
                    ["src/earshot/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython toolchain: install anyway, the package falls back to the
        # numpy implementation of the kernels at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
