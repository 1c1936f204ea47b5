"""Builds the optional compiled kernel extension.

Set FAIRSCHED_PURE_PYTHON=1 to skip compilation; the package then runs on
the numpy fallback kernels.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FAIRSCHED_PURE_PYTHON"):
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "fairsched.kernels._native",
                    ["src/fairsched/kernels/_native.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
