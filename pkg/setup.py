"""Build script for the optional compiled kernel core.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a failed cythonize/compile step downgrades to a plain
source install instead of aborting.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "covertrace.kernels._core",
                ["src/covertrace/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # noqa: BLE001 - any build-chain failure means fallback
    print(f"covertrace: compiled kernels unavailable ({exc}); "
          "installing with the pure-numpy fallback")

setup(ext_modules=ext_modules)
