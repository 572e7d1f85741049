from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        Extension("warpein._kernels", ["src/warpein/_kernels.pyx"], include_dirs=[np.get_include()]),
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # no Cython: the package falls back to warpein._kernels_py
    ext_modules = []

setup(ext_modules=ext_modules)
