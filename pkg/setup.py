"""Optional compiled canonicalizer; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DWSG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(["src/dwsg/tensor/_canon.pyx"], compiler_directives={"language_level": 3})
    except ImportError:
        pass

setup(ext_modules=ext_modules)
