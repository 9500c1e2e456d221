"""CMake-driven extension build (pybind11 cmake_example pattern)."""

import os
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name, sourcedir=""):
        super().__init__(name, sources=[])
        self.sourcedir = os.fspath(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        extdir = (Path.cwd() / self.get_ext_fullpath(ext.name)).parent.resolve()
        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            ["cmake", ext.sourcedir,
             "-DCMAKE_BUILD_TYPE=Release",
             "-DWIGAIT_MODULE_ONLY=ON",
             f"-DWIGAIT_MODULE_OUTPUT={extdir}"],
            cwd=build_temp, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core",
             f"-j{os.cpu_count() or 2}"],
            cwd=build_temp, check=True)


setup(
    ext_modules=[CMakeExtension("wigait._core")],
    cmdclass={"build_ext": CMakeBuild},
)
