"""Build script for the optional compiled trajectory kernel.

The package works without the extension (a pure numpy backend is selected at
import time); building it speeds up Monte Carlo ensembles considerably.
Set WICKGL_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("WICKGL_NO_EXT") and os.path.exists("src/wickgl/_kernels.pyx"):
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "wickgl._kernels",
                ["src/wickgl/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
