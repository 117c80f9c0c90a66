from setuptools import setup

# read the contents of your README file
from pathlib import Path

this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text()

setup(
    name='sparsereg',
    version='1.0.0',
    description='sparsereg: sparse regression and screening for imaging-genetics cohorts',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=["sparsereg",
              "sparsereg.models",
              "sparsereg.pipeline",
              "sparsereg.preprocess",
              "sparsereg.report"],
    package_data={"sparsereg.pipeline": ["config.json"]},
    install_requires=[
        "joblib>=1",
        "loguru>=0.6",
        "numpy>=1.20",
        "pandas>=1.5",
        "scikit-learn>=1",
        "scipy>=1.6",
        "tqdm>=4",
        "typer>=0.4"
    ],
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["sparsereg=sparsereg.__main__:main"]},
    classifiers=['Development Status :: 4 - Beta',
                 'Programming Language :: Python :: 3.8',
                 'Intended Audience :: Science/Research'],
    include_package_data=True
)
