from setuptools import setup
from setuptools.extension import Extension

import numpy
from Cython.Build import cythonize

extensions = [
    Extension(
        "mvembed._sgns",
        ["src/mvembed/_sgns.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    ),
]

setup(ext_modules=cythonize(extensions, language_level=3))
