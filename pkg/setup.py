"""Build hook for the optional compiled integration core.

The package works without the extension (the pure Python engine is the
fallback), so a failed build is downgraded to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension
except ImportError:
    numpy = None
    cythonize = None

ext_modules = []
if cythonize is not None:
    # No -ffast-math / -march=native, and no contracted multiply-adds: the
    # compiled engine must agree with the pure Python engine bit for bit.
    ext_modules = cythonize(
        [
            Extension(
                "blfsim._core",
                ["src/blfsim/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    print("blfsim: Cython or numpy unavailable, skipping compiled core", file=sys.stderr)

setup(ext_modules=ext_modules)
