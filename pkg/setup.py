from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "urllcopt._ckernel",
                ["src/urllcopt/_ckernel.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
                libraries=["m"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
