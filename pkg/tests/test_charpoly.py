import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaywave import charpoly
from delaywave.charpoly import ExponentialPolynomial, Rectangle
from delaywave.errors import BoundaryRoot, DomainError, StripEscape

# real roots of D z^2 - (a z + b) e^{rz}, from mpmath.findroot at 30 digits
FROZEN_ROOTS = {
    (1.0, 2.0, 0.01, 1.0): (2.0272443305407074, -0.9966795844579493),
    (3.0, 2.0, 0.1, 1.0): (6.1510029378866636, -0.55723268190689231),
    (2.5, 1.0, 0.05, 2.0): (1.6829193117025833, -0.31787127983572369),
}


def test_horner_matches_direct_evaluation():
    rng = np.random.default_rng(0)
    P = ExponentialPolynomial.from_tuples(
        [(1.5, 3, 0.0), (-2.0, 1, 0.3), (0.7, 0, 0.3), (4.0, 2, -0.1), (-1.0, 0, 0.0)])
    z = rng.uniform(-5, 5, 1000) + 1j * rng.uniform(-20, 20, 1000)
    direct, horner = charpoly.eval(P, z), P.horner(z)
    assert np.max(np.abs(direct - horner) / P.scale(z)) < 1e-13


def test_derivative_against_difference_quotient():
    P = charpoly.char_poly(1.0, 2.0, 0.1, D=1.5)
    z, h = 0.3 + 2.0j, 1e-6
    fd = (P(z + h) - P(z - h)) / (2 * h)
    assert abs(charpoly.eval_d(P, z) - fd) < 1e-7


def test_char_poly_terms():
    P = charpoly.char_poly(2.0, 3.0, 0.5, D=4.0)
    z = 0.7 - 1.1j
    assert P(z) == pytest.approx(4 * z**2 - (2 * z + 3) * np.exp(0.5 * z), rel=1e-14)


def test_nodelay_roots_are_roots():
    lam1, lam2 = charpoly.roots_nodelay(1.0, 2.0)
    assert (lam1, lam2) == pytest.approx((2.0, -1.0))


def test_nodelay_rejects_bad_coefficients():
    with pytest.raises(DomainError):
        charpoly.roots_nodelay(1.0, -2.0)


@pytest.mark.parametrize("key", sorted(FROZEN_ROOTS))
def test_continued_roots_match_frozen(key):
    a, b, r, D = key
    lam1, lam2 = charpoly.roots_nodelay(a, b, D)
    family = lambda s: charpoly.char_poly(a, b, s, D)  # noqa: E731
    eta1 = charpoly.continue_root(family, lam1, r, strip=(0.0, 2 * lam1 + 1.0 + 10 * r * lam1))
    eta2 = charpoly.continue_root(family, lam2, r, strip=(2 * lam2, 0.0))
    assert (eta1, eta2) == pytest.approx(FROZEN_ROOTS[key], rel=1e-10)


def test_continuation_leaving_strip_raises():
    family = lambda s: charpoly.char_poly(3.0, 2.0, s)  # noqa: E731
    lam1, _ = charpoly.roots_nodelay(3.0, 2.0)
    with pytest.raises(StripEscape):
        charpoly.continue_root(family, lam1, 0.1, strip=(0.0, lam1 + 0.1))


def test_root_slope_limit_matches_difference():
    lam1, _ = charpoly.roots_nodelay(1.0, 2.0)
    h = 1e-5
    eta = charpoly.continue_root(lambda s: charpoly.char_poly(1.0, 2.0, s), lam1, h)
    assert (eta - lam1) / h == pytest.approx(charpoly.root_slope_limit(1.0, 2.0), rel=1e-4)


def test_winding_counts_polynomial_roots():
    P = ExponentialPolynomial.from_tuples([(1.0, 2, 0.0), (-1.0, 0, 0.0)])  # z^2 - 1
    assert charpoly.winding_count(P, Rectangle(-2, 2, -1, 1)) == 2
    assert charpoly.winding_count(P, Rectangle(0.5, 2, -1, 1)) == 1
    assert charpoly.winding_count(P, Rectangle(-0.5, 0.5, -1, 1)) == 0


def test_root_on_contour_is_reported():
    P = ExponentialPolynomial.from_tuples([(1.0, 2, 0.0), (-1.0, 0, 0.0)])
    with pytest.raises(BoundaryRoot):
        charpoly.winding_count(P, Rectangle(1.0, 2.0, -1, 1))


def test_margin_vanishes_without_delay():
    assert charpoly.imaginary_axis_margin(1.0, 2.0, 0.0, 100.0) == 0.0


def test_margin_grows_with_delay():
    m = [charpoly.imaginary_axis_margin(3.0, 2.0, r, 200.0) for r in (0.01, 0.05, 0.1)]
    assert m[0] < m[1] < m[2] < 1


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.5, 4.0), b=st.floats(0.5, 4.0), r=st.floats(0.0, 0.05))
def test_principal_roots_property(a, b, r):
    lam1, lam2 = charpoly.roots_nodelay(a, b)
    family = lambda s: charpoly.char_poly(a, b, s)  # noqa: E731
    eta1 = charpoly.continue_root(family, lam1, r, strip=(0.0, 2 * lam1 + 1.0))
    eta2 = charpoly.continue_root(family, lam2, r, strip=(2 * lam2, 0.0))
    P = family(r)
    assert eta1 > 0 > eta2
    assert abs(P(eta1)) <= 1e-9 * float(P.scale(eta1))
    assert abs(P(eta2)) <= 1e-9 * float(P.scale(eta2))
    # the delay only pushes the positive root out
    assert eta1 >= lam1 - 1e-12
    if r > 0:
        assert charpoly.winding_count(P, Rectangle(2 * lam2, 0.0, -50, 50)) == 1
