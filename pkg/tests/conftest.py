import numpy as np
import pytest

from nelsonlab import MassPair, collide, substream


@pytest.fixture
def head_on():
    """M=4, m=1 head-on collision along x: v2 = 0.2, w2 = 2.2."""
    masses = MassPair(M=4.0, m=1.0)
    return masses, collide([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
                           [1.0, 0.0, 0.0], masses)


@pytest.fixture
def rng():
    return substream(8675309, 0)


def random_event(rng, gamma2=None, scale=5.0):
    """One random collision event with a uniform axis."""
    g2 = float(rng.uniform(1e-4, 1.0)) if gamma2 is None else gamma2
    masses = MassPair.from_gamma2(g2)
    phi = rng.standard_normal(3)
    phi /= np.linalg.norm(phi)
    v1 = rng.uniform(-scale, scale, 3)
    w1 = rng.uniform(-scale, scale, 3)
    return collide(v1, w1, phi, masses)
