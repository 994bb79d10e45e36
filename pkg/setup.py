"""Build script. The compiled search kernel is optional: if Cython or a C
compiler is unavailable the package installs anyway and falls back to the
pure-Python kernel at import time."""

from setuptools import setup

ext_modules = []
include_dirs = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "conforce._speedups",
                ["src/conforce/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception:  # pragma: no cover - build-environment dependent
    ext_modules = []

setup(ext_modules=ext_modules)
