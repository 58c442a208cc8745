"""Arrival models, sampling, serialization, and the rate estimator."""

import numpy as np
import pytest

from platooncoord import Constant, DiscreteRandom, Exponential, RateEstimator, make_rng
from platooncoord.arrivals import atoms_of, model_from_json, model_to_json


def test_exponential_density_at_zero():
    assert Exponential(0.02).density(0.0) == pytest.approx(0.02)


def test_exponential_density_integrates_to_one():
    from platooncoord.quadrature import adaptive_simpson

    model = Exponential(0.02)
    density = np.vectorize(model.density)
    for horizon in (10.0, 100.0, 1000.0):
        mass = adaptive_simpson(density, 0.0, horizon, 1e-12)
        assert mass + model.tail_mass(horizon) == pytest.approx(1.0, abs=1e-10)


def test_exponential_tail():
    model = Exponential(0.05)
    assert model.tail_mass(0.0) == 1.0
    assert model.tail_mass(20.0) == pytest.approx(np.exp(-1.0))


def test_exponential_sample_mean():
    model = Exponential(0.02)
    rng = make_rng(0)
    draws = np.array([model.sample(rng) for _ in range(10**6)])
    assert draws.mean() == pytest.approx(50.0, abs=0.5)


def test_constant_model():
    model = Constant(10.0)
    rng = make_rng(1)
    assert model.density(10.0) == 1.0
    assert model.density(9.0) == 0.0
    assert model.tail_mass(20.0) == 0.0
    assert model.tail_mass(5.0) == 1.0
    assert all(model.sample(rng) == 10.0 for _ in range(5))
    assert model.mean() == 10.0


def test_discrete_frequencies():
    model = DiscreteRandom(atoms=((15.0, 0.4), (8.0, 0.6)))
    rng = make_rng(2)
    draws = np.array([model.sample(rng) for _ in range(10**6)])
    assert np.mean(draws == 15.0) == pytest.approx(0.4, abs=0.005)
    assert model.mean() == pytest.approx(15.0 * 0.4 + 8.0 * 0.6)


def test_discrete_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        DiscreteRandom(atoms=((15.0, 0.4), (8.0, 0.5)))
    with pytest.raises(ValueError, match="positive"):
        DiscreteRandom(atoms=((-1.0, 1.0),))


def test_atoms_dispatch():
    assert atoms_of(Constant(10.0)) == ((10.0, 1.0),)
    assert atoms_of(DiscreteRandom(atoms=((5.0, 1.0),))) == ((5.0, 1.0),)
    assert atoms_of(Exponential(0.02)) is None


@pytest.mark.parametrize(
    "model",
    [
        Exponential(0.02),
        Constant(10.0),
        DiscreteRandom(atoms=((15.0, 0.4), (8.0, 0.6))),
    ],
)
def test_json_round_trip(model):
    assert model_from_json(model_to_json(model)) == model


def test_json_unknown_type():
    with pytest.raises(ValueError, match="unknown arrival model"):
        model_from_json({"type": "weibull"})


def test_estimator_constant_full_window():
    est = RateEstimator(beta=0.9, m_steps=50)
    for _ in range(120):
        est.observe(50.0)
    # Geometric-series closed form, evaluated independently.
    oracle = 1.0 / (50.0 * (1.0 - 0.9**50))
    assert oracle == pytest.approx(0.020103, abs=1e-6)
    assert est.estimate() == pytest.approx(oracle, rel=1e-12)


def test_estimator_single_observation():
    est = RateEstimator(beta=0.9, m_steps=50)
    est.observe(10.0)
    assert est.estimate() == pytest.approx(1.0, rel=1e-12)


def test_estimator_window_truncation():
    # Observations older than m_steps must not influence the estimate.
    est_a = RateEstimator(beta=0.9, m_steps=50)
    est_b = RateEstimator(beta=0.9, m_steps=50)
    for _ in range(200):
        est_a.observe(3.0)
    for h in [3.0] * 50:
        est_b.observe(h)
    assert est_a.estimate() == pytest.approx(est_b.estimate(), rel=1e-12)


def test_estimator_rejects_bad_input():
    est = RateEstimator()
    with pytest.raises(ValueError):
        est.observe(0.0)
    with pytest.raises(ValueError):
        est.estimate()
    with pytest.raises(ValueError):
        RateEstimator(beta=1.0)


def test_estimator_long_run_average():
    # The discounted window's mean equals (1 - beta^M)/rate, so the harmonic
    # long-run average of the estimate matches rate/(1 - beta^M).
    rate, beta, m = 0.05, 0.9, 50
    est = RateEstimator(beta=beta, m_steps=m)
    rng = make_rng(11)
    gaps = rng.exponential(1.0 / rate, size=10**5)
    recip = []
    for i, x in enumerate(gaps):
        est.observe(float(x))
        if i >= m:
            recip.append(1.0 / est.estimate())
    corrected = rate / (1.0 - beta**m)
    assert 1.0 / np.mean(recip) == pytest.approx(corrected, rel=0.05)


def test_rng_reproducibility():
    a = make_rng(42).exponential(size=5)
    b = make_rng(42).exponential(size=5)
    assert np.array_equal(a, b)
