import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

openmp = sys.platform.startswith("linux") and not os.environ.get("VMIFS_NO_OPENMP")
flags = ["-O3", "-fopenmp"] if openmp else ["-O3"]

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "vmifs._kernels_cy",
                ["src/vmifs/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=flags,
                extra_link_args=["-fopenmp"] if openmp else [],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
