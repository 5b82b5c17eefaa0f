from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(["src/minitcp/_codec.pyx"])
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
