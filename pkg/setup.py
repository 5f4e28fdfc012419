from setuptools import setup

setup(
    name='richspec',
    description='Plant species richness prediction from hyperspectral '
    'reflectance',
    packages=['richspec'],
    package_data={'richspec': ['data/*.csv']},
    version='0.1.0',
    license='MIT',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.4',
        'pandas>=1.5',
        'joblib>=0.14',
        'pytest>=3.3.2',
    ],
    entry_points={
        'console_scripts': ['richspec = richspec.cli:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: GIS',
    ],
)
