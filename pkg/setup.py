from setuptools import find_packages, setup

with open("requirements.txt") as f:
    requirements = f.read().splitlines()

setup(
    name='arslack',
    version='0.1.0',
    packages=find_packages(),
    url='',
    license='',
    author='Jakob Rößler',
    author_email='',
    description='Autoregression with slack time series for partially observed linear dynamics',
    install_requires=requirements,
    extras_require={"test": ["hypothesis"]},
    python_requires=">=3.10",
    entry_points={"console_scripts": ["arslack = arslack.cli:main"]},
)
