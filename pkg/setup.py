"""Build script: compiles the accelerated sampling core if Cython is present.

The package works without the extension (a numpy fallback is selected at
import time), so a failed build only costs speed.
"""

import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        "src/kquad/_accel/_core.pyx",
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(
    ext_modules=ext_modules,
    include_dirs=[np.get_include()],
)
