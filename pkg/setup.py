"""Build script: compiles the optional C extension holding the walk kernels.

If Cython or a C compiler is unavailable the build still succeeds and the
package falls back to the pure-Python kernels in raptorwalk._engine.pure.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "raptorwalk._engine._core",
        ["src/raptorwalk/_engine/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
