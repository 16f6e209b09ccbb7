from setuptools import setup

# read the contents of the README file
from os import path

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, "README.md"), encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="cifeedback",
    version="0.1.0",
    description="Finite-element feedback stabilization of the 1D Chafee-Infante equation",
    author="cifeedback developers",
    packages=["cifeedback"],
    install_requires=["numpy>=1.20", "scipy>=1.6", "sympy>=1.7", "jsonschema"],
    extras_require={"test": ["pytest"], "docs": ["sphinx", "sphinx-glpi-theme"]},
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_data={"cifeedback": ["../kb/*"]},
    entry_points={"console_scripts": ["cifeedback=cifeedback.cli:main"]},
)
