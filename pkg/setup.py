"""Build the optional Cython statevector kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compile is downgraded to a warning.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "cvarq._kernels_cy",
                ["src/cvarq/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"warning: skipping Cython kernels ({exc}); using pure-python fallback", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
