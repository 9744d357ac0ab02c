"""Build the optional compiled path-simulation core.

The package works without it: cenlevy.engine falls back to a vectorized
NumPy implementation when cenlevy._core is missing.
"""
import os

from setuptools import setup

ext_modules = []
try:
    from setuptools import Extension
    from Cython.Build import cythonize

    if not os.path.exists(os.path.join("src", "cenlevy", "_core.pyx")):
        raise ImportError("no extension source present")
    ext = Extension(
        "cenlevy._core",
        ["src/cenlevy/_core.pyx"],
        # no -ffast-math: the core must reproduce libm arithmetic exactly
        extra_compile_args=["-O3", "-funroll-loops"],
        optional=True,  # a failed compile must not break the install
    )
    ext_modules = cythonize(
        [ext],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
