import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fairstream._simplex",
                ["src/fairstream/_simplex.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Building without Cython is allowed: the package falls back to the
    # pure-Python solver backend at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
