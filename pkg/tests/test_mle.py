import numpy as np
import pytest

from twinloss import (
    Histogram,
    ParamSet,
    classical_fim,
    covariance_estimate,
    fit,
    kl_objective,
    model_pnd,
    moment_init,
    sample_shots,
)
from twinloss.mle import _kl_divergence


def exact_model_histogram(theta, scale, cutoff=None):
    probs = model_pnd(theta, cutoff).probs
    return Histogram(counts=np.round(scale * probs))


def test_two_outcome_divergence_value():
    value = _kl_divergence(np.array([0.5, 0.5]), np.array([0.25, 0.75]))
    assert value == pytest.approx(0.1438410362, abs=1e-9)


def test_objective_vanishes_on_exact_model(theta_a):
    hist = exact_model_histogram(theta_a, 1e15)
    objective = kl_objective(hist, theta_a)
    assert 0.0 <= objective < 1e-12


def test_objective_invariant_under_count_scaling(theta_a):
    hist = exact_model_histogram(theta_a, 1e6, cutoff=10)
    tripled = Histogram(counts=3 * hist.counts)
    assert kl_objective(hist, theta_a) == kl_objective(tripled, theta_a)


def test_objective_infinite_when_model_excludes_data():
    counts = np.zeros((4, 4))
    counts[1, 1] = 90
    counts[1, 0] = 10
    lossless = ParamSet(eta1=1.0, eta2=1.0, r=0.7)
    assert kl_objective(Histogram(counts=counts), lossless) == np.inf


def test_objective_differences_track_log_likelihood(theta_a):
    hist = sample_shots(theta_a, 10_000, cutoff=12, seed=21)
    theta_1 = theta_a.replace(eta1=0.41, r=1.25)
    theta_2 = theta_a.replace(eta2=0.36, nu1=0.05)

    def conditional_log_likelihood(theta):
        probs = model_pnd(theta, hist.cutoff).probs
        occupied = hist.counts > 0
        p_hat = probs[occupied] / probs[occupied].sum()
        return float(np.sum(hist.counts[occupied] * np.log(p_hat)))

    lhs = kl_objective(hist, theta_1) - kl_objective(hist, theta_2)
    rhs = -(
        conditional_log_likelihood(theta_1) - conditional_log_likelihood(theta_2)
    ) / hist.total
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_moment_init_lands_in_plausible_region(theta_a):
    hist = sample_shots(theta_a, 50_000, cutoff=14, seed=3)
    init = moment_init(hist)
    assert 0.2 < init.eta1 < 0.8
    assert 0.2 < init.eta2 < 0.8
    assert 0.5 < init.r < 2.0
    assert init.nu1 == init.nu2 == 0.02


def test_fit_recovers_exact_model_parameters(theta_a):
    hist = exact_model_histogram(theta_a, 1e6, cutoff=12)
    result = fit(hist)
    assert result.converged
    recovered = result.theta_hat.values()
    assert np.abs(recovered - theta_a.values()).max() < 1e-4
    assert result.objective < 2e-6
    assert result.rms_error < 1e-6
    assert result.covariance is not None and result.covariance.shape == (5, 5)
    assert result.condition_number is not None


def test_fit_synthetic_million_shots_within_five_sigma(theta_a):
    hist = sample_shots(theta_a, 10**6, cutoff=16, seed=11)
    sigma = np.sqrt(
        np.diag(np.linalg.inv(classical_fim(theta_a, cutoff=16).entries)) / 10**6
    )
    result = fit(hist)
    assert result.converged
    deviation = np.abs(result.theta_hat.values() - theta_a.values())
    assert (deviation < 5.0 * sigma).all()


def test_fit_is_deterministic(theta_a):
    hist = sample_shots(theta_a, 10_000, cutoff=12, seed=5)
    kwargs = dict(free=("eta1", "eta2", "r"), n_starts=2, seed=9)
    a = fit(hist, theta_a, **kwargs)
    b = fit(hist, theta_a, **kwargs)
    assert a.theta_hat == b.theta_hat
    assert a.objective == b.objective


def test_fit_respects_fixed_parameters(theta_a):
    hist = sample_shots(theta_a, 10_000, cutoff=12, seed=5)
    result = fit(hist, theta_a, free=("r", "eta1"), n_starts=1)
    assert result.free == ("eta1", "r")
    assert result.theta_hat.eta2 == theta_a.eta2
    assert result.theta_hat.nu1 == theta_a.nu1
    assert result.theta_hat.nu2 == theta_a.nu2
    assert result.covariance is None or result.covariance.shape == (2, 2)


def test_fit_flags_singular_covariance():
    counts = np.zeros((3, 3))
    counts[0, 0] = 100
    init = ParamSet(eta1=0.3, eta2=0.3, r=0.4)
    with pytest.warns(UserWarning, match="covariance"):
        result = fit(Histogram(counts=counts), init, free=("eta1", "eta2"), n_starts=1)
    assert result.covariance is None
    assert result.condition_number is None


def test_fit_validation(theta_a):
    hist = exact_model_histogram(theta_a, 1e4, cutoff=6)
    with pytest.raises(ValueError):
        fit(hist, theta_a, free=("phi",))
    with pytest.raises(ValueError):
        fit(hist, theta_a, free=())
    with pytest.raises(ValueError):
        fit(hist, theta_a, n_starts=0)
    with pytest.raises(ValueError):
        fit(hist, theta_a, parametrization="log")


def test_covariance_matches_information_inverse(theta_a):
    mu = 1e6
    counts = mu * model_pnd(theta_a).probs
    cov, cond = covariance_estimate(counts, theta_a)
    expected = np.linalg.inv(mu * classical_fim(theta_a).entries)
    assert np.abs(cov - expected).max() < 1e-6 * np.abs(expected).max()
    assert np.abs(cov - cov.T).max() < 1e-20
    assert np.linalg.eigvalsh(cov).min() > 0.0
    assert cond > 1.0


def test_histogram_from_shots_bins_and_overflows():
    shots = np.array([[0, 0], [1, 2], [1, 2], [4, 0], [9, 9]])
    hist = Histogram.from_shots(shots, cutoff=(4, 4))
    assert hist.counts[0, 0] == 1
    assert hist.counts[1, 2] == 2
    assert hist.counts[4, 0] == 1
    assert hist.overflow == 1
    assert hist.total == 4
    assert hist.shots == 5

    unbounded = Histogram.from_shots(shots)
    assert unbounded.counts.shape == (10, 10)
    assert unbounded.overflow == 0


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram(counts=np.array([1, 2, 3]))
    with pytest.raises(ValueError):
        Histogram(counts=np.array([[0.5, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        Histogram(counts=np.array([[-1, 0], [0, 0]]))
    with pytest.raises(ValueError):
        Histogram(counts=np.zeros((2, 2), dtype=int), overflow=-1)
    with pytest.raises(ValueError):
        Histogram.from_shots(np.zeros((0, 2), dtype=int))
