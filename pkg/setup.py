from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; neon.kernels falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "neon._ckernels",
                ["src/neon/_ckernels.pyx"],
                # no fast-math / FMA: scores must match the numpy fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
