"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so the build is marked optional and any compiler
failure downgrades to the pure-Python install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mvcone._kernels._core",
                ["src/mvcone/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps scalar arithmetic bit-compatible
                # with the NumPy fallback (no FMA contraction surprises).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
