import numpy as np
from setuptools import setup
from setuptools.extension import Extension

# The compiled voting kernel is optional: if Cython is unavailable the
# package installs pure-Python and vptrack.voting falls back to the
# numpy implementation at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vptrack._voting",
                ["src/vptrack/_voting.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
