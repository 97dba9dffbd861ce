from setuptools import Extension, setup

# The compiled kernel extension is optional: if Cython (or a C compiler) is
# unavailable the package falls back to the pure-numpy kernels at import time.
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "storyqg._kernels.kernels_cy",
                ["src/storyqg/_kernels/kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
