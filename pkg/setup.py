from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="flowBR",
    version="0.1",
    description="Breathing rate estimation from sparse pyramidal optical flow",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=["Programming Language :: Python :: 3"],
    packages=["flowBR"],
    package_dir={"flowBR": "flowBR"},
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "matplotlib",
        "pillow",
        "alive-progress",
    ],
    extras_require={"test": ["pytest"], "docs": ["sphinx", "sphinx_rtd_theme"]},
    entry_points={"console_scripts": ["flowbr=flowBR.cli:main"]},
)
