"""Build hooks for the optional compiled kernel core.

The package is fully functional without compilation (a vectorized numpy
backend is selected at import time); building the Cython extension speeds
up the contour-dynamics and particle-sampling hot loops by roughly an
order of magnitude.  `pip install .` compiles when Cython and a C
compiler are present and silently falls back to pure Python otherwise.
"""

import os

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if os.environ.get("TWISTLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        compile_args = ["-O3"]
        link_args = []
        if os.environ.get("TWISTLAB_NO_OPENMP") != "1":
            compile_args.append("-fopenmp")
            link_args.append("-fopenmp")
        ext_modules = cythonize(
            [
                Extension(
                    "twistlab._core.cykernels",
                    ["src/twistlab/_core/cykernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
