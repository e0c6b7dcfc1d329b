import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -O3 only: no fast-math, so the compiled loops keep IEEE semantics and agree
# with the pure-Python fallback to rounding.
ext_modules = [
    Extension(
        "tracerfriction._core",
        ["src/tracerfriction/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(ext_modules, compiler_directives={"language_level": "3"}))
