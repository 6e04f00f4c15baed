"""Build the optional compiled kernel.

The package works without the extension (a pure numpy fallback is selected at
import time), so any build failure here downgrades to a source-only install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cyclefit._kernels._speedups",
                ["src/cyclefit/_kernels/_speedups.pyx"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"cyclefit: skipping compiled kernel ({exc}); pure fallback will be used")

setup(ext_modules=ext_modules)
