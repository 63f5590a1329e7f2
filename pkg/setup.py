"""Setup script for omniact."""
from setuptools import setup, find_packages
import pathlib

# The directory containing this file
HERE = pathlib.Path(__file__).parent

# The text of the README file
README = (HERE / "README.md").read_text()


setup(
    name="omniact",
    version="1.0.0",
    description=("Fisheye unwrapping and weakly supervised action recognition"
                 " for top-view omnidirectional video"),
    long_description=README,
    long_description_content_type="text/markdown",
    license="MIT",
    packages=find_packages(exclude=['*.test']),
    include_package_data=True,
    entry_points={
        'console_scripts': ['omniact=omniact.cli:main']
        },
    python_requires='>=3.7',
    install_requires=[
        'numpy',
        'scipy',
        'tqdm',
        'h5py',
        'Pillow',
        ],
    extras_require={
        'test': [
            'pytest',
            'pytest-cov',
            'scikit-learn',
            ],
        }
    )
