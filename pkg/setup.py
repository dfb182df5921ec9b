"""Build script.

The tracking kernel has an optional Cython extension; when it cannot be
built the package falls back to the pure-Python kernel at import time.
"""

import os

from setuptools import setup

ext_modules = []
_PYX = os.path.join("src", "lcc", "_kernels", "_fast.pyx")
if os.path.exists(_PYX):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize([_PYX], language_level=3)
    except ImportError:
        pass

setup(ext_modules=ext_modules)
