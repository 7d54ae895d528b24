helpstr="""
Installation script for the EventWarden simulator.
It could be run just as any regular python program,
> python setup.py install --user
(here --user allows it to be installed without admin privilegies),
or via pip:
> pip install --user .
(here . means that it should take the files from the current folder).

The package is pure python; it needs numpy (random generation of scenarios and tests)
and pycryptodome (the Keccak-256 hash function), which are installed by pip if missing.
After installation, the command-line program is available as
> eventwarden data/canonical.ini --report table
and the test suite is run by
> python setup.py test
"""
import os, sys
from setuptools import setup, Command

# get the list of all files in the given directories (including those in nested directories)
def allFiles(*paths):
    return [os.path.join(dirpath, f) \
        for path in paths \
        for dirpath, dirnames, files in os.walk(path) \
        for f in files]

class MyTest(Command):
    description  = 'run tests'
    user_options = []
    def initialize_options(self): pass
    def finalize_options  (self): pass
    def run(self):
        from py.alltest import alltest
        os.chdir('py')
        if not alltest():
            sys.exit(1)

if '-h' in sys.argv or '--help' in sys.argv: print(helpstr)

setup(
    name             = 'eventwarden',
    version          = '1.0',
    description      = 'Deterministic simulator of event-driven transactions released by proxy contracts',
    long_description = open('README').read(),
    install_requires = ['numpy', 'pycryptodome'],
    packages         = ['eventwarden', 'eventwarden.py'],
    package_dir      = {'eventwarden': '.', 'eventwarden.py': 'py'},
    package_data     = {'eventwarden': allFiles('data') + ['README', 'DESIGN.md']},
    entry_points     = {'console_scripts': ['eventwarden = eventwarden.py.cli:main']},
    cmdclass         = {'test': MyTest},
    zip_safe         = False,
    classifiers      = [
    'Development Status :: 4 - Beta',
    'Intended Audience :: Science/Research',
    'Programming Language :: Python :: 3']
)
