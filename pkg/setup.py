from setuptools import Extension, setup

# The recall scan kernel (automaton traversal + longest-match segmentation)
# ships as an optional Cython extension; kgchat.recall falls back to the
# pure-Python implementation when the compiled module is unavailable.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        Extension(
            "kgchat.recall._scan",
            ["src/kgchat/recall/_scan.pyx"],
            optional=True,
        ),
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
