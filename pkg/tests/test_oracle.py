"""Exhaustive-enumeration reference values, frozen from hand derivations.

The closed forms below were worked out directly from the definition of
site percolation on each tiny lattice (cluster = maximal set of adjacent
occupied sites), independently of any code in this package. They pin the
enumeration oracle, which in turn pins the Monte Carlo engine.
"""

from fractions import Fraction

import numpy as np
import pytest

from perclab.analysis import UndefinedValueError, enumerate_exact
from perclab.lattice import LatticeGeometry

EXACT = 1e-12

# 3x3 free lattice at p = 1/2, derived by expectation sums over the 512
# configurations: E[count_s] * 512 are integers, S = E[M2]/E[M1] = 379/96,
# P(spanning) = 271/512.
REF_3X3_COUNTS = [
    0.0,
    0.78125,
    0.28125,
    0.20703125,
    0.1640625,
    0.134765625,
    0.1015625,
    0.0625,
    0.017578125,
    0.001953125,
]
REF_3X3_S = Fraction(379, 96)
REF_3X3_SPAN = Fraction(271, 512)


def test_3x3_free_frozen_reference():
    g = LatticeGeometry((3, 3), boundary="free")
    ref = enumerate_exact(g, 0.5)
    assert ref.expected_counts.shape == (10,)
    np.testing.assert_allclose(ref.expected_counts, REF_3X3_COUNTS, atol=EXACT)
    assert abs(ref.mean_size - float(REF_3X3_S)) < EXACT
    assert abs(ref.spanning_probability - float(REF_3X3_SPAN)) < EXACT
    # occupied count is Binomial(9, 1/2): mean 4.5, variance 2.25
    assert abs(ref.mean_m1 - 4.5) < EXACT
    assert abs(ref.var_m1 - 2.25) < EXACT
    np.testing.assert_allclose(ref.n_s, np.asarray(REF_3X3_COUNTS) / 9, atol=EXACT)


def test_1x4_free_frozen_reference():
    g = LatticeGeometry((1, 4), boundary="free")
    ref = enumerate_exact(g, 0.5)
    np.testing.assert_allclose(
        ref.expected_counts, [0.0, 0.75, 0.3125, 0.125, 0.0625], atol=EXACT
    )
    assert abs(ref.mean_size - 33 / 16) < EXACT
    # the length-1 axis cannot span; spanning the chain needs all 4 sites
    assert abs(ref.spanning_probability - 0.0625) < EXACT


@pytest.mark.parametrize("p", [0.2, 0.3, 0.8])
def test_1x4_closed_forms_general_p(p):
    q = 1.0 - p
    g = LatticeGeometry((1, 4), boundary="free")
    ref = enumerate_exact(g, p)
    assert abs(ref.expected_counts[1] - (2 * p * q + 2 * p * q * q)) < EXACT
    assert abs(ref.expected_counts[2] - (2 * p * p * q + p * p * q * q)) < EXACT
    assert abs(ref.expected_counts[3] - 2 * p**3 * q) < EXACT
    assert abs(ref.expected_counts[4] - p**4) < EXACT
    assert abs(ref.spanning_probability - p**4) < EXACT
    assert abs(ref.mean_m1 - 4 * p) < EXACT
    assert abs(ref.var_m1 - 4 * p * q) < EXACT


def test_1x2_count_variances():
    p = 0.5
    g = LatticeGeometry((1, 2), boundary="free")
    ref = enumerate_exact(g, p)
    # c1 is 1 iff exactly one site occupied, c2 is 1 iff both
    assert abs(ref.expected_counts[1] - 0.5) < EXACT
    assert abs(ref.expected_counts[2] - 0.25) < EXACT
    assert abs(ref.count_variance[1] - 0.25) < EXACT
    assert abs(ref.count_variance[2] - 0.1875) < EXACT


def test_ring_closed_forms():
    # on a 5-ring a cluster of size s < 4 needs s consecutive occupied
    # sites flanked by two empties; size 4 needs exactly one empty; the
    # ring wraps only when fully occupied
    p = 0.6
    q = 1.0 - p
    g = LatticeGeometry((5,), boundary="periodic")
    ref = enumerate_exact(g, p)
    for s in (1, 2, 3):
        assert abs(ref.expected_counts[s] - 5 * p**s * q * q) < EXACT
    assert abs(ref.expected_counts[4] - 5 * p**4 * q) < EXACT
    assert abs(ref.expected_counts[5] - p**5) < EXACT
    assert abs(ref.spanning_probability - p**5) < EXACT
    ref9 = enumerate_exact(g, 0.9)
    assert abs(ref9.spanning_probability - 0.9**5) < EXACT


def test_endpoints():
    g = LatticeGeometry((3, 3), boundary="free")
    ref0 = enumerate_exact(g, 0.0)
    assert ref0.mean_m1 == 0.0
    assert ref0.spanning_probability == 0.0
    assert np.all(ref0.expected_counts == 0.0)
    with pytest.raises(UndefinedValueError):
        ref0.mean_size
    ref1 = enumerate_exact(g, 1.0)
    assert ref1.expected_counts[9] == 1.0
    assert ref1.mean_size == 9.0
    assert ref1.spanning_probability == 1.0
    assert ref1.var_m1 == 0.0


def test_free_vs_periodic_differ():
    gp = LatticeGeometry((3, 3), boundary="periodic")
    ref = enumerate_exact(gp, 0.5)
    # wrapping is strictly harder than touching both faces at p = 1/2
    assert ref.spanning_probability < float(REF_3X3_SPAN)
    assert ref.mean_size > float(REF_3X3_S)  # extra bonds merge clusters


def test_input_validation():
    g = LatticeGeometry((3, 3), boundary="free")
    with pytest.raises(ValueError):
        enumerate_exact(g, 1.5)
    with pytest.raises(ValueError):
        enumerate_exact(LatticeGeometry((3, 7), boundary="free"), 0.5)
