import numpy as np
import pytest

from omdkit.geometry import EUCLIDEAN, NormSpec, as_vector, dual_exponent, inner, p_norm


def test_inner_orthogonal_axes():
    assert inner([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_inner_hand_arithmetic():
    assert inner([1.0, 2.0], [3.0, 4.0]) == 11.0


def test_inner_zero_vector_annihilates():
    rng = np.random.default_rng(0)
    w = rng.standard_normal(7)
    assert inner(w, np.zeros(7)) == 0.0


def test_inner_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        inner([1.0, 2.0], [1.0, 2.0, 3.0])


def test_p_norm_pythagorean():
    assert p_norm([3.0, 4.0], 2.0) == 5.0


def test_p_norm_direct_formula():
    # (1^1.5 + 1^1.5)^(1/1.5) = 2^(2/3)
    assert p_norm([1.0, 1.0], 1.5) == pytest.approx(2.0 ** (2.0 / 3.0), abs=1e-15)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 7.0])
@pytest.mark.parametrize("c", [2.5, -0.3])
def test_p_norm_single_coordinate(p, c):
    assert p_norm([c, 0.0, 0.0], p) == pytest.approx(abs(c), abs=1e-15)


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, np.inf])
def test_p_norm_rejects_out_of_range_exponents(p):
    with pytest.raises(ValueError):
        p_norm([1.0, 2.0], p)


@pytest.mark.parametrize("p,expected", [(2.0, 2.0), (1.5, 3.0), (4.0 / 3.0, 4.0)])
def test_dual_exponent(p, expected):
    assert dual_exponent(p) == pytest.approx(expected, abs=1e-12)


def test_dual_exponent_rejects_p_at_most_one():
    with pytest.raises(ValueError):
        dual_exponent(1.0)


def test_dual_exponents_are_conjugate():
    for p in [1.2, 1.5, 1.9, 3.0]:
        q = dual_exponent(p)
        assert 1.0 / p + 1.0 / q == pytest.approx(1.0, abs=1e-15)


def test_as_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector([1.0, np.inf])
    with pytest.raises(ValueError):
        as_vector([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_vector([])


def test_holder_inequality_random_sweep():
    rng = np.random.default_rng(7)
    for p in (1.2, 1.5, 2.0):
        q = dual_exponent(p)
        for _ in range(1000):
            w = rng.standard_normal(6) * rng.choice([0.1, 1.0, 10.0])
            v = rng.standard_normal(6) * rng.choice([0.1, 1.0, 10.0])
            assert abs(inner(w, v)) <= p_norm(w, p) * p_norm(v, q) + 1e-12


def test_triangle_inequality_random_sweep():
    rng = np.random.default_rng(8)
    for p in (1.2, 1.5, 2.0):
        for _ in range(1000):
            w = rng.standard_normal(5)
            v = rng.standard_normal(5)
            assert p_norm(w + v, p) <= p_norm(w, p) + p_norm(v, p) + 1e-12


def test_norm_spec_dual_round_trip():
    n = NormSpec(1.5)
    assert n.dual.p == pytest.approx(3.0, abs=1e-15)
    assert n.dual.dual.p == pytest.approx(1.5, abs=1e-15)
    assert EUCLIDEAN.dual.p == 2.0


def test_norm_spec_is_callable():
    assert NormSpec(2.0)([3.0, 4.0]) == 5.0
