import numpy as np
import pytest
from scipy import stats

from roundedcounts import Binomial, NegativeBinomial, Poisson

ALL_MODELS = [Poisson(0.5), Poisson(2.0), Poisson(7.3), Binomial(20, 0.35),
              Binomial(4, 0.3), NegativeBinomial(5, 0.4)]


def test_poisson_pmf_values():
    model = Poisson(2.0)
    assert model.pmf(0) == pytest.approx(np.exp(-2.0), abs=1e-14)
    # theta**4 exp(-theta)/4! = (2/3) exp(-2)
    assert model.pmf(4) == pytest.approx(2.0 / 3.0 * np.exp(-2.0), abs=1e-15)
    assert model.pmf(4) == pytest.approx(0.09022352215774178, abs=1e-15)


def test_binomial_pmf_symmetry():
    assert Binomial(2, 0.5).pmf(1) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pmf_matches_scipy(model):
    ks = np.arange(0, model.support_bound(1e-12) + 1)
    if model.kind == "poisson":
        ref = stats.poisson.pmf(ks, model.theta)
    elif model.kind == "binomial":
        ref = stats.binom.pmf(ks, model.trials, model.prob)
    else:
        ref = stats.nbinom.pmf(ks, model.size, model.prob)
    assert np.max(np.abs(model.pmf(ks) - ref)) < 1e-13


def test_log_domain_handles_large_parameters():
    model = Poisson(4000.0)
    assert 0 < model.pmf(4000) < 1
    ks = np.arange(model.support_bound(1e-13) + 1)
    assert np.sum(model.pmf(ks)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pgf_at_one_is_one(model):
    assert model.pgf(1.0) == pytest.approx(1.0, abs=1e-12)


def test_pgf_at_zero_is_mass_at_zero():
    assert Poisson(1.0).pgf(0.0) == pytest.approx(np.exp(-1.0), abs=1e-14)


def test_binomial_pgf_alternating_series():
    model = Binomial(4, 0.3)
    # oracle: sum of (-1)**y p_y over the full support
    oracle = sum((-1.0) ** y * model.pmf(y) for y in range(5))
    assert model.pgf(-1.0) == pytest.approx(oracle, abs=1e-14)
    assert model.pgf(-1.0) == pytest.approx(0.0256, abs=1e-14)


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pgf_matches_truncated_power_series(model):
    ks = np.arange(0, model.support_bound(1e-14) + 1)
    ps = model.pmf(ks)
    # 100 points: the unit circle plus the real segment [-1, 1]
    points = np.concatenate([
        np.exp(1j * np.linspace(0.0, 2 * np.pi, 50, endpoint=False)),
        np.linspace(-1.0, 1.0, 50).astype(complex),
    ])
    for s in points:
        series = np.sum(ps * s ** ks)
        assert abs(model.pgf(s) - series) < 1e-10


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pgf_derivative_matches_finite_difference(model):
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(20):
        s = complex(rng.uniform(-0.99, 0.99), rng.uniform(-0.99, 0.99))
        if abs(s) > 0.99:
            continue
        fd = (model.pgf(s + h) - model.pgf(s - h)) / (2 * h)
        assert abs(model.pgf_derivative(s) - fd) < 1e-6


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pgf_derivative_at_one_is_mean(model):
    assert model.pgf_derivative(1.0) == pytest.approx(model.mean(), rel=1e-10)
    assert Poisson(3.0).pgf_derivative(1.0) == pytest.approx(3.0, abs=1e-12)
    assert Binomial(10, 0.2).pgf_derivative(1.0) == pytest.approx(2.0, abs=1e-12)


def test_poisson_pgf_derivative_value():
    # theta * exp(theta (s-1)) at theta=2, s=0.5 -> 2 e^{-1}
    assert Poisson(2.0).pgf_derivative(0.5) == pytest.approx(2 * np.exp(-1.0), abs=1e-12)
    assert Poisson(2.0).pgf_derivative(0.5) == pytest.approx(0.7357588823428847, abs=1e-12)


@pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
def test_pgf_conjugate_symmetry(model):
    rng = np.random.default_rng(11)
    for _ in range(25):
        s = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        if abs(s) > 1:
            continue
        assert model.pgf(np.conj(s)) == pytest.approx(np.conj(model.pgf(s)), abs=1e-12)


def test_support_bound_binomial_is_trials():
    assert Binomial(12, 0.4).support_bound(1e-6) == 12
    assert Binomial(12, 0.4).support_bound(0.3) == 12


def test_support_bound_poisson_cumulative_oracle():
    model = Poisson(5.0)
    eps = 1e-12
    bound = model.support_bound(eps)
    # oracle: accumulate pmf until the residual drops below eps
    total, k = 0.0, 0
    while 1.0 - total >= eps:
        total += float(model.pmf(k))
        k += 1
    oracle = k - 1
    assert bound == oracle
    assert model.sf(bound) < eps
    assert model.sf(bound - 1) >= eps


def test_support_bound_rejects_bad_eps():
    with pytest.raises(ValueError):
        Poisson(5.0).support_bound(0.0)
    with pytest.raises(ValueError):
        Poisson(5.0).support_bound(1.5)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Poisson(0.0)
    with pytest.raises(ValueError):
        Poisson(-1.0)
    with pytest.raises(ValueError):
        Binomial(0, 0.5)
    with pytest.raises(ValueError):
        Binomial(5, 1.2)
    with pytest.raises(ValueError):
        NegativeBinomial(-1.0, 0.5)
    with pytest.raises(ValueError):
        NegativeBinomial(2.0, 0.0)


def test_negative_binomial_pgf_pole_guard():
    model = NegativeBinomial(3.0, 0.25)
    with pytest.raises(ValueError):
        model.pgf(1.0 / 0.75)


def test_binomial_degenerate_probs():
    assert Binomial(4, 0.0).pmf(0) == pytest.approx(1.0)
    assert Binomial(4, 1.0).pmf(4) == pytest.approx(1.0)
    assert Binomial(4, 1.0).pmf(2) == 0.0
