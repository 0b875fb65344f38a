# -*- coding: utf-8 -*-

from setuptools import setup, find_packages


def readme():
    with open('README.md', 'r') as f:
        return f.read()

app_name = "merge_distill"
app_description = 'Multi-teacher masked LM distillation into one multilingual student'
app_long_description = readme() + '\n\n'
app_platform = ["Linux"]
app_keywords = "distillation masked-language-model multilingual vocabulary"
installrequires = [
    'numpy',
    'matplotlib',
    'click',
    'PyYAML',
]

setup(
        name=app_name,
        version="0.1.0",
        description=app_description,
        long_description=app_long_description,
        long_description_content_type='text/markdown',
        platforms=app_platform,
        keywords=app_keywords,
        packages=find_packages(exclude=['tests', 'docs']),
        classifiers=[
            'Programming Language :: Python :: 3',
            'Topic :: Software Development :: Libraries :: Python Modules',
            'Topic :: Scientific/Engineering :: Artificial Intelligence'],
        entry_points={
            'console_scripts': [
                'merge-distill=merge_distill.cli:main',
            ],
        },
        tests_require=['pytest'],
        install_requires=installrequires,
)
