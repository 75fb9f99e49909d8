#!/usr/bin/env python
# -*- coding: utf-8 -*-
import io
import os

from setuptools import find_packages, setup

NAME = "ddvi-lab"
FOLDER = "ddvi_lab"
DESCRIPTION = "Denoising diffusion variational inference for latent-variable autoencoders."
AUTHOR = "ddvi-lab developers"
REQUIRES_PYTHON = ">=3.8.0"
VERSION = None


def read_file(filename):
    with open(filename) as fp:
        return fp.read().strip()


def read_requirements(filename):
    return [line.strip() for line in read_file(filename).splitlines()
            if line.strip() and not line.startswith("#")]


REQUIRED = read_requirements("requirements.txt")

here = os.path.abspath(os.path.dirname(__file__))

try:
    with io.open(os.path.join(here, "README.md"), encoding="utf-8") as f:
        long_description = "\n" + f.read()
except FileNotFoundError:
    long_description = DESCRIPTION
about = {}
if not VERSION:
    with open(os.path.join(here, FOLDER, "__init__.py")) as f:
        for line in f:
            if line.startswith("__version__"):
                about["__version__"] = line.split("=", 1)[1].strip().strip("\"'")
else:
    about["__version__"] = VERSION


setup(
    name=NAME,
    version=about["__version__"],
    description=DESCRIPTION,
    long_description=long_description,
    long_description_content_type="text/markdown",
    author=AUTHOR,
    python_requires=REQUIRES_PYTHON,
    packages=find_packages(exclude=("tests",)),
    install_requires=REQUIRED,
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["ddvi=ddvi_lab.cli:main"]},
    license="MIT",
    zip_safe=False,
    keywords=[
        'variational-inference',
        'diffusion',
        'autoencoder'
    ],
    classifiers=[
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
    ],
)
