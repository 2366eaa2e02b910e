"""Build script for the optional compiled likelihood kernel.

The package is fully functional without the extension: the import shim in
``anchorroute.cnpsl.kernel`` falls back to the pure-numpy implementation
when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "anchorroute.cnpsl._kernel_cy",
                ["src/anchorroute/cnpsl/_kernel_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
