"""Build the optional compiled simulation kernel.

Without Cython or a C compiler the package still installs; the pure-Python
kernel is then selected at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "rosslab._simkernel",
                ["src/rosslab/_simkernel.pyx"],
                include_dirs=[np.get_include()],
                # contraction into FMA would break bit-identity with the Python kernel
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
