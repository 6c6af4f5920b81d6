import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HANGERLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install; kernels fall back to numpy
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "hangerlab._ckernels",
                    ["src/hangerlab/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no fp contraction: results must match the numpy fallback bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
