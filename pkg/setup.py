"""Build script for the optional compiled kernels.

The extension is skipped when Cython is unavailable; the package then runs
on the numpy fallback in ``irsdetect._fallback``.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "irsdetect._kernels",
                ["src/irsdetect/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
