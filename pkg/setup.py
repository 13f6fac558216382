"""Build script: compiles the optional statevector kernel extension.

The package works without the extension (entopt.backend falls back to the
pure-NumPy kernels); set ENTOPT_NO_EXT=1 to skip compilation entirely.
"""
import os

from setuptools import Extension, setup


def get_ext_modules():
    if os.environ.get("ENTOPT_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "entopt._kernels",
        ["src/entopt/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=get_ext_modules())
