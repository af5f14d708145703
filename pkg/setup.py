import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HODGE_SPECTRA_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install
        pass
    else:
        ext = Extension(
            "hodge_spectra._ckernels",
            ["src/hodge_spectra/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            language="c++",
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], compiler_directives={"language_level": 3})

setup(ext_modules=ext_modules)
