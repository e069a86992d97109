import numpy as np
import pytest
from scipy import special as sp

from vpsheath.special import fresnel, fresnel_cs


@pytest.mark.parametrize("z", [0.0, 1e-8, 0.3, 1.0, 2.0, 2.4999, 2.5, 2.5001, 3.7, 8.0, 25.0, 400.0])
def test_matches_scipy(z):
    s_ref, c_ref = sp.fresnel(z)
    c, s = fresnel_cs(z)
    assert c == pytest.approx(c_ref, abs=1e-13)
    assert s == pytest.approx(s_ref, abs=1e-13)


def test_odd_symmetry():
    for z in (0.7, 3.3):
        c, s = fresnel_cs(z)
        assert fresnel_cs(-z) == (-c, -s)


def test_vectorized_dense_sweep():
    z = np.linspace(0, 12, 2401)
    c, s = fresnel(z)
    s_ref, c_ref = sp.fresnel(z)
    assert np.max(np.abs(c - c_ref)) < 1e-13
    assert np.max(np.abs(s - s_ref)) < 1e-13


def test_large_argument_limit():
    c, s = fresnel_cs(1e6)
    assert c == pytest.approx(0.5, abs=1e-6)
    assert s == pytest.approx(0.5, abs=1e-6)
