from pathlib import Path

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

EXTENSIONS = [
    Extension(
        "splatflow._kernels",
        sources=[str(Path("src") / "splatflow" / "_kernels.pyx")],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(EXTENSIONS, language_level="3"))
