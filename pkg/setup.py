import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SGRBM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "sgrbm._kernels._core",
                    ["src/sgrbm/_kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
