"""
Setup module for the ngdSim application.
"""

from setuptools import setup

setup(
    name="ngdSim",
    version="1.0.0",
    py_modules=[
        "analysis",
        "block_manager",
        "circuit_blocks",
        "config_manager",
        "errors",
        "lti_core",
        "main",
        "output_manager",
        "propagation",
        "report_manager",
        "scenario_manager",
        "signals",
    ],
    packages=["scenarios"],
    package_data={"scenarios": ["*.json"]},
    description="Simulator of negative-group-delay op-amp feedback circuits.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    install_requires=[
        "rich",
        "numpy",
        "scipy",
        "matplotlib",
    ],
    extras_require={
        "test": ["pytest", "hypothesis"],
    },
    entry_points={
        "console_scripts": [
            "ngdSim=main:main",
        ],
    },
    include_package_data=True,
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Electronic Design Automation (EDA)",
    ],
    python_requires=">=3.8",
)
