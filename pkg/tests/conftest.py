import numpy as np
import pytest

from fhdyn.fourier import TrigPoly

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture
def golden():
    return GOLDEN


def random_real_zero_mean(rng, degree, scale=1.0):
    """Random real trig polynomial with zero mean and degree <= degree."""
    modes = {}
    for n in range(1, degree + 1):
        a = complex(rng.normal(), rng.normal()) * scale / n
        modes[(n,)] = a
        modes[(-n,)] = a.conjugate()
    return TrigPoly(1, modes, realflag=True)


def random_complex(rng, degree, scale=1.0):
    modes = {}
    for n in range(-degree, degree + 1):
        modes[(n,)] = complex(rng.normal(), rng.normal()) * scale
    return TrigPoly(1, modes)
