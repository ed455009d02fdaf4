import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or with LRSCAN_SKIP_EXT=1)
# the package installs pure-Python and selects the numpy fallback at import.
ext_modules = []
if os.environ.get("LRSCAN_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "lrscan._kernels._core",
                    ["src/lrscan/_kernels/_core.pyx"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
