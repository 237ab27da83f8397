# -*- coding: utf-8 -*-
from setuptools import setup, find_packages

install_reqs = [
    'numba',
    'numpy',
    'psutil',
    'pyyaml',
    'scipy',
]

# scikit-learn serves as the plain-GMM reference in the test suite only
extras_reqs = {
    'test': ['scikit-learn'],
}

# use entry_points, not scripts:
entry_points = {
    'console_scripts': ["denoisebid = denoisebid.cli.main:main"]
    }

setup(
    name='denoisebid',
    setup_requires=['setuptools-scm'],
    use_scm_version={'fallback_version': '0.1.0'},
    description='Bayesian denoising of CTR/CVR predictions for '
                'budget and CPC constrained autobidding',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    license='BSD',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
    ],
    entry_points=entry_points,
    packages=find_packages(),
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=install_reqs,
    extras_require=extras_reqs,
)
