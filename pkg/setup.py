import setuptools, re

"""
Gradient compression toolkit: nonuniform stochastic quantization, Elias
recursive coding of quantized gradients, variance and code length bounds and
a deterministic simulator of distributed SGD.
"""

def find_version(fname):
    """
    Attempts to find the version number in the file names fname.
    Raises RuntimeError if not found.
    """
    version = ''
    with open(fname, 'r') as fp:
        reg = re.compile(r'__version__ = [\'"]([^\'"]*)[\'"]')
        for line in fp:
            m = reg.match(line)
            if m:
                version = m.group(1)
                break
    if not version:
        raise RuntimeError('Cannot find version information')
    return version

def get_requirements(fname):
    deps = []
    with open(fname, 'r') as f:
        deps = [ l for l in f if l.strip() and '#' != l[0] ]
    return list(deps)


d = {
        'name' : 'nuqkit',
        'version' : find_version('nuqkit/__init__.py'),
        'description' : 'Nonuniform gradient quantization toolkit.',
        'author' : 'nuqkit developers',
        'license' : 'MIT',
        'long_description' : __doc__,
        'packages' : ['nuqkit'],
        'install_requires' : get_requirements( 'requirements.txt' ),
        'entry_points' : {
            'console_scripts': [
                'nuqkit=nuqkit.nuqkit:main',
            ]
        },
    }

setuptools.setup(**d)
