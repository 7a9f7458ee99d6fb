import os

from setuptools import Extension, setup

# The compiled kernel core is optional: the package falls back to the pure
# numpy kernels when the extension is absent. Set POSELIFT_NO_EXT=1 to skip
# the build entirely (e.g. on a machine without a C compiler).
ext_modules = []
if not os.environ.get("POSELIFT_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "poselift._kernels._ckernels",
                    ["src/poselift/_kernels/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
