from setuptools import setup, find_packages

NAME = "cql-switch"
VERSION = "1.0.0"

REQUIRES = [
    'numpy>=1.22.0',
    'scipy>=1.9.0',
    'pandas>=1.5.0',
    'python-dotenv>=1.0.0',
]

setup(
    name=NAME,
    version=VERSION,
    description="Control-quasi-latitudinal magnetization switching for macrospin LLS dynamics",
    author="",
    url="",
    keywords=["Landau-Lifshitz-Slonczewski", "Magnetization Switching", "Spin Transfer Torque", "Normal Form"],
    install_requires=REQUIRES,
    packages=find_packages(exclude=["test", "tests", "docs"]),
    include_package_data=True,
    python_requires=">=3.8",
    entry_points={
        "console_scripts": [
            "cql-switch=cql_switch.cli:main",
        ],
    },
    long_description="""
    cql-switch - Synthesis and simulation of a three-stage injected-current control
    (expulsion, quasi-latitudinal transfer, free attraction) that switches a macrospin
    between the two in-plane equilibria, with sampled stage thresholds and a figure
    reproduction harness.
    """
)
