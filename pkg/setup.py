from setuptools import setup, find_packages
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "scripts"))
from get_version import get_plrtest_version  # noqa: E402

setup(
    name='plrtest',
    version=get_plrtest_version(),
    author='Omena0',
    author_email='omena0mc@gmail.com',
    description='Penalized likelihood ratio two-sample test with MMD/KS baselines and a power-study harness',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    license_files=['COPYING.md'],
    url='https://github.com/Omena0/plrtest',
    packages=find_packages(include=['plrtest', 'plrtest.*']),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.9',
        'pandas>=1.5',
        'joblib>=1.2',
        'zstd>=1.5.0',
    ],
    extras_require={
        'plot': ['matplotlib>=3.5'],
        'test': ['pytest>=7', 'pytest-cov'],
    },
    entry_points={
        'console_scripts': ['plrtest=plrtest.cli:main'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: 3.13',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Software Development :: Libraries :: Python Modules',
    ],
)
