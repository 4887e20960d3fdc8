"""Build script: compiles the optional Cython kernel core.

The package is fully functional without the extension (a numpy implementation
is selected at import time), so the extension is marked optional and any
build failure downgrades to the fallback instead of failing the install.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source install without build deps
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "gcgeig._kernels._cy",
                ["src/gcgeig/_kernels/_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
