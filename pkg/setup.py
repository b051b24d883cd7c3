"""Build script: compiles the optimal-transport hot kernel when Cython and a C
toolchain are available, otherwise installs with the pure-Python fallback."""

import os

from setuptools import setup
from setuptools.extension import Extension

extensions = []
if os.environ.get("FAIRSWITCH_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "fairswitch._ot._core",
                    ["src/fairswitch/_ot/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
