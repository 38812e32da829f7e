"""Build script for the optional compiled B-spline kernel.

The package works without the extension (a vectorized numpy fallback is
selected at import time); building it just makes the hot basis-evaluation
loop faster.  Build in place with:

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tfkan._kernels._bspline",
                ["src/tfkan/_kernels/_bspline.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
