import json

import numpy as np
import pytest

from delaywave import models, waves
from delaywave.errors import GuardViolation
from delaywave.models import BZParams, FisherParams

from conftest import BZ, FISHER

# mpmath.findroot on z^2 - c z e^{r1 z} + q e^{(r1 + extra) z} (30 digits)
FROZEN = {
    "fisher_neutral": 0.49590236174265442,    # c=2.5, q=1, r1=0.01, extra=-0.01
    "fisher_lower": 2.3462429312460587,       # c=2.5, q=1/2, r1=0.01, extra=-0.01
    "bz_lambda1": 2.7019188960188649,         # c=3, q=1, r1=0.01
    "bz_mu1": 2.0825712221391359,             # c=3, q=b=2
    "bz_lambda2": 2.9118545220071061,         # c=3, q=1/2
    "bz_nu": 0.27517018786285651,             # c=3, q=s=3/4, smaller root
}


@pytest.mark.parametrize("kwargs, text", [
    (dict(c=2.0), "c > 2"),
    (dict(c=2.5, theta=1.0), "theta"),
    (dict(c=2.5, k=1.5), "k >= 2"),
    (dict(c=2.5, tau1=-1.0), "tau1"),
])
def test_fisher_guards(kwargs, text):
    with pytest.raises(GuardViolation, match=text):
        FisherParams(**kwargs).check()


@pytest.mark.parametrize("kwargs, text", [
    (dict(c=3.0, b=1.0, r=0.25), "b > 1"),
    (dict(c=3.0, b=2.0, r=0.3), "r <= 1/4"),
    (dict(c=2.0, b=2.0, r=0.25), r"c > 2 sqrt\(b\)"),
])
def test_bz_guards(kwargs, text):
    with pytest.raises(GuardViolation, match=text):
        BZParams(**kwargs).check()


def test_closed_form_rates_without_delay():
    # the undelayed rates are (c -+ sqrt(c^2 - 4)) / 2
    p = FisherParams(c=2.5)
    assert p.mu == pytest.approx((0.5, 2.0))
    assert models.fisher_upper_rate(p, "neutral") == pytest.approx(0.5, rel=1e-12)


def test_fisher_roots_match_frozen():
    assert models.fisher_upper_rate(FISHER, "neutral") == pytest.approx(FROZEN["fisher_neutral"], rel=1e-10)
    assert models.continued_root(2.5, 0.5, 0.01, -0.01) == pytest.approx(FROZEN["fisher_lower"], rel=1e-10)


def test_bz_roots_match_frozen():
    roots = models.bz_roots(BZ)
    for key in ("lambda1", "mu1", "lambda2"):
        assert roots[key] == pytest.approx(FROZEN["bz_" + key], rel=1e-10)
    assert models.continued_root(3.0, 0.75, 0.01, branch="smaller") == pytest.approx(FROZEN["bz_nu"], rel=1e-10)


def test_logistic_derivatives():
    v, d1, d2 = models._logistic(0.7, 0.5)
    t, h = np.linspace(-5, 5, 11), 1e-5
    assert d1(t) == pytest.approx((v(t + h) - v(t - h)) / (2 * h), abs=1e-9)
    assert d2(t) == pytest.approx((d1(t + h) - d1(t - h)) / (2 * h), abs=1e-9)
    assert v(0.0) == pytest.approx(1 / 1.5)


def test_neutral_bz_upper_is_c1():
    up = models.bz_neutral_upper(BZ)
    for i, tj in enumerate(up.kinks):
        for fn in (up.value[i], up.d1[i]):
            assert fn(tj - 1e-9) == pytest.approx(fn(tj + 1e-9), abs=1e-7)


def test_candidates_ordered():
    for model, upper, lower in (models.fisher_candidates(FISHER), models.bz_candidates(BZ)):
        t = np.linspace(-60, 60, 2001)
        for i in range(model.m):
            assert np.all(lower.value[i](t) <= upper.value[i](t))


def test_builders_verify():
    model, upper, lower = models.fisher(FISHER)
    assert upper.m == lower.m == 1
    model, upper, lower = models.bz(BZ, upper="neutral")
    assert model.beta == (1.25, 2.0)


def test_neutral_upper_passes_verification():
    model, upper, _ = models.fisher_candidates(FISHER, upper_rate="neutral")
    assert waves.verify_upper(model, upper).passed


def test_model_json_roundtrip():
    model, upper, _ = models.bz_candidates(BZ)
    text = models.model_to_json(model)
    assert json.loads(text)["schema"] == "delaywave.model/1"
    m2, up2, _ = models.model_from_json(text)
    assert m2 == model
    t = np.linspace(-3, 3, 7)
    assert np.array_equal(up2.value[1](t), upper.value[1](t))


def test_unknown_model_name():
    with pytest.raises(ValueError):
        models.params_from_dict("gray-scott", {"c": 1.0})


def test_bz_reaction_sign():
    # f1 = u (s - u + r v_lag) in the transformed variable
    model = models.bz_candidates(BZ)[0]
    f1, f2 = model.rates(([0.5], [0.4]), ([0.5], [0.8]))
    assert f1[0] == pytest.approx(0.5 * (0.75 - 0.5 + 0.25 * 0.8))
    assert f2[0] == pytest.approx(2.0 * 0.5 * 0.6)
