from setuptools import setup, find_packages

setup(
    name="dsfactory",
    version="0.1.0",
    description="Dataset Factory - versioned metadata tables over archive-resident vision datasets",
    author="Dataset Factory Team",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    install_requires=[
        "requests",
        "tabulate",
        "pydantic>=2.0.0",
        "numpy",
        "pandas",
        "python-dotenv",
    ],
    extras_require={
        "test": ["pytest", "hypothesis"],
    },
    entry_points={
        "console_scripts": [
            "df=dsfactory.cli.main:main",
        ],
    },
    python_requires=">=3.9",
)
