"""Build script for the optional compiled kernel backend.

The package is fully functional without the extension (a pure-Python/numpy
fallback is selected at import time), so a failed extension build degrades
gracefully to a source-only install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                name="afsdf.backend._core",
                sources=["src/afsdf/backend/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    sys.stderr.write(
        "afsdf: Cython/numpy unavailable at build time (%s); "
        "installing without the compiled backend\n" % exc
    )

setup(ext_modules=ext_modules)
