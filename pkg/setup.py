from setuptools import find_packages, setup

setup(
    name="EMEFlow",
    version="0.1.0",
    description="Double-slit EME density and flow-line simulator",
    packages=find_packages(exclude=["tests*", "examples*"]),
    include_package_data=True,
    entry_points={"console_scripts": ["emeflow = emeflow.cli:main"]},
)
