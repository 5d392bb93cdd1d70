import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "difffactor._kernels._compiled",
                ["src/difffactor/_kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError as exc:
    # The package runs on the numpy fallback kernels without the extension.
    print(f"difffactor: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
