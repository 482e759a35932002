import pathlib

from setuptools import setup, find_packages


def parse_requirements(requirements_file):
    with open(requirements_file) as req:
        return [r for r in req.read().strip().split('\n') if r and not r.startswith("#")]


def get_pkgdata():
    if not pathlib.Path("pkgdata.txt").exists():
        return {"package.name": "spinepr", "package.version": "0.0.0.dev0"}
    data = {}
    with open("pkgdata.txt") as f:
        lines = f.readlines()
    for row in lines:
        row_s = str(row).strip()
        if row_s and not row_s.startswith("#"):
            key = row_s.split("=")[0]
            value = row_s.split("=")[1]
            data[key] = value
    return data


here = pathlib.Path(__file__).parent.resolve()
pkgdata = get_pkgdata()

# Get the long description from the README file
long_description = (here / 'README.md').read_text(encoding='utf-8')
package_name = pkgdata["package.name"]
package_version = pkgdata["package.version"]


setup(
    name=package_name,
    version=package_version,
    description='EPR entanglement of spin-mixing pairs in spin-1 condensates: exact, truncated Wigner '
                'and undepleted-pump solvers',
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Physics',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: 3 :: Only',
    ],
    license='MIT',
    keywords='spinor condensate, spin mixing, EPR, entanglement, truncated Wigner, exact diagonalization',
    package_dir={'spinepr': 'spinepr'},
    packages=find_packages(where='.', exclude=['tests*']),
    package_data={'spinepr': ['resources/*.json']},
    entry_points={
        'console_scripts': [
            'spinepr = spinepr.cli.spinepr:entry',
        ]
    },
    python_requires='>=3.9, <4',
    install_requires=parse_requirements("requirements.txt"),
    extras_require={},
    include_package_data=True,
)
