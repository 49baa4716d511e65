import os
import re

from setuptools import setup, find_packages

HERE = os.path.abspath(os.path.dirname(__file__))


def read(*parts):
    with open(os.path.join(HERE, *parts), 'r') as fp:
        return fp.read()


def find_version(*file_paths):
    version_file = read(*file_paths)
    version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", version_file, re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError("Unable to find version string.")


setup(
    name='pathharden',
    version=find_version('pathharden', '__init__.py'),
    description='Hash-based hardening of input-filter conditionals',
    license='Apache-2.0',
    packages=find_packages(exclude=('pathharden.tests', 'pathharden.tests.*')),
    package_data={'pathharden': ['corpus/*.ml1']},
    long_description_content_type="text/markdown",
    long_description=open('README.md').read(),
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'pandas',
        'lmfit',
        'sympy',
        'tqdm',
        'lark>=1.1',
    ],
    entry_points={
        'console_scripts': ['pathharden=pathharden.cli:main'],
    },
)
