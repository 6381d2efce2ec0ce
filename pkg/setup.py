"""Build script for the optional compiled DBM core.

The package is fully functional without the extension; tacv.zones falls
back to the pure-Python kernels when `tacv._dbm_c` is not importable.
Set TACV_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TACV_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/tacv/_dbm_c.pyx"],
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.optional = True
    except ImportError:
        pass

setup(ext_modules=ext_modules)
