"""Build script: compiles the optional simulation kernel.

The package is fully functional without the extension (a pure-Python core is
selected at import time); set LNGOSSIP_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

_PYX = "src/lngossip/core/_kernel.pyx"

ext_modules = []
if os.environ.get("LNGOSSIP_NO_EXT") != "1" and os.path.exists(_PYX):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "lngossip.core._kernel",
                    [_PYX],
                    language="c++",
                    extra_compile_args=["-O2", "-std=c++17"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
