"""
Setup script for the percolation laboratory
"""

from setuptools import setup
from pathlib import Path

# Read the README file
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text(encoding="utf-8") if readme_file.exists() else ""

# Read requirements (runtime section only; the dev tools live in extras_require)
requirements_file = Path(__file__).parent / "requirements.txt"
if requirements_file.exists():
    requirements = []
    for line in requirements_file.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line.startswith("# Development"):
            break
        if line and not line.startswith("#"):
            requirements.append(line)
else:
    requirements = ["numpy>=1.24", "scipy>=1.10", "pyyaml>=6.0", "tqdm>=4.65.0"]

setup(
    name="percolab",
    version="1.0.0",
    description="Bernoulli bond percolation laboratory for finite transitive graphs",
    long_description=long_description,
    long_description_content_type="text/markdown",
    py_modules=[
        "main", "cli", "config", "errors", "models", "utils", "runner",
        "graphs", "percolation", "oracle", "estimators", "coupling", "structure",
        "experiments",
    ],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "black>=23.7.0",
            "flake8>=6.1.0",
            "mypy>=1.5.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "percolab=main:main",
        ],
    },
    include_package_data=True,
    zip_safe=False,
    keywords="percolation random graphs giant component monte carlo threshold",
)
