import warnings

import numpy as np
import pytest

import raterfit as rf
from raterfit import mcmc
from raterfit.diagnostics import effective_sample_size
from raterfit.errors import InitError, NumericalError
from raterfit.likelihood import Posterior
from raterfit.model import resolve_spec

from conftest import random_long


def _normal_logp(scales):
    prec = 1.0 / np.asarray(scales) ** 2

    def logp(q):
        return -0.5 * float(np.sum(prec * q * q)), -prec * q

    return logp


def test_standard_normal_variances():
    dim = 5
    cfg = mcmc.SamplerConfig(chains=1, warmup=1000, draws=4000)
    out = [mcmc.hmc_chain(_normal_logp(np.ones(dim)), np.full(dim, 2.0), cfg, r) for r in mcmc.chain_rngs(3, 4)]
    x = np.stack([o["draws"] for o in out])  # (4, 4000, dim)
    for d in range(dim):
        ess = effective_sample_size(x[:, :, d])
        assert abs(x[:, :, d].mean()) < 3 / np.sqrt(ess)
        # the variance estimate is a mean of x^2, whose variance is 2 for a standard normal
        ess_sq = effective_sample_size(x[:, :, d] ** 2)
        assert abs(x[:, :, d].var() - 1.0) < 3 * np.sqrt(2.0 / ess_sq)


def test_badly_scaled_normal_mass_adaptation():
    scales = np.array([0.01, 1.0, 30.0])
    cfg = mcmc.SamplerConfig(chains=1, warmup=1000, draws=3000)
    out = mcmc.hmc_chain(_normal_logp(scales), np.zeros(3), cfg, np.random.default_rng(0))
    sd = out["draws"].std(axis=0)
    np.testing.assert_allclose(sd / scales, 1.0, atol=0.15)
    np.testing.assert_allclose(np.sqrt(out["inv_mass"]) / scales, 1.0, atol=0.3)


def test_mass_windows_fill_warmup():
    for n in (0, 1, 10, 74, 600, 601, 6000):
        w = mcmc._mass_windows(n)
        assert sum(w) == n
        assert all(x > 0 for x in w)


def test_init_error_for_hopeless_density():
    def logp(q):
        raise NumericalError("nope")

    with pytest.raises(InitError):
        mcmc.hmc_chain(logp, np.zeros(2), mcmc.SamplerConfig(warmup=10, draws=10), np.random.default_rng(0))


def test_sample_init_retries_then_fails(monkeypatch):
    calls = []

    def bad(self, v, jacobian=True):
        calls.append(1)
        raise NumericalError("gradient is not finite")

    d = random_long(np.random.default_rng(0), 5, 2, 2)
    spec = resolve_spec("dawid_skene", 2, 2)
    monkeypatch.setattr(Posterior, "log_density", bad)
    with pytest.raises(InitError, match="5 attempts"):
        mcmc.sample(spec, d, mcmc.SamplerConfig(chains=1, warmup=10, draws=10, seed=0))
    assert len(calls) == 5


def test_config_validation():
    with pytest.raises(ValueError):
        mcmc.SamplerConfig(chains=0)
    with pytest.raises(ValueError):
        mcmc.SamplerConfig(target_accept=1.0)
    with pytest.raises(ValueError):
        mcmc.SamplerConfig(draws=0)


def _small(seed=5, **kw):
    d = random_long(np.random.default_rng(11), 20, 3, 3)
    spec = resolve_spec("dawid_skene", 3, 3)
    cfg = mcmc.SamplerConfig(chains=2, warmup=150, draws=100, seed=seed, **kw)
    return mcmc.sample(spec, d, cfg)


def test_sampling_is_deterministic():
    a, da = _small()
    b, db = _small()
    np.testing.assert_array_equal(a.values, b.values)
    assert da.to_dict() == db.to_dict()
    c, _ = _small(seed=6)
    assert not np.array_equal(a.values, c.values)


def test_parallel_chains_match_serial():
    a, _ = _small()
    b, _ = _small(n_jobs=2)
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("variant", ["dawid_skene", "class_conditional", "hierarchical"])
def test_draws_respect_constraints(variant):
    d = random_long(np.random.default_rng(12), 15, 2, 3)
    spec = resolve_spec(variant, 3, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        draws, diag = mcmc.sample(spec, d, mcmc.SamplerConfig(chains=2, warmup=100, draws=50, seed=1))
    assert draws.values.shape == (2, 50, len(draws.names))
    x = draws.flat()
    pi = x[:, [draws.index(f"pi[{k}]") for k in (1, 2, 3)]]
    assert np.all(pi > 0) and np.allclose(pi.sum(axis=1), 1)
    if variant == "dawid_skene":
        th = x[:, draws.index("theta[1,1,1]"):].reshape(-1, 2, 3, 3)
        assert np.all(th > 0) and np.allclose(th.sum(axis=3), 1)
    elif variant == "class_conditional":
        p = x[:, draws.index("p[1,1]"):]
        assert np.all((p > 0) & (p < 1))
    else:
        s = x[:, draws.index("sigma[1,1]"):draws.index("sigma[3,3]") + 1]
        assert np.all(s > 0)
    assert np.all(np.asarray(diag.rhat) >= 1 - 1e-6)
    assert np.all(np.asarray(diag.ess) >= 0)


def test_anesthesia_acceptance_near_target(anesthesia_mcmc):
    for a in anesthesia_mcmc.diagnostics.accept_rate:
        assert abs(a - 0.8) <= 0.1


def test_anesthesia_pi_ess(anesthesia_mcmc):
    d = anesthesia_mcmc.draws
    for k in range(1, 5):
        assert anesthesia_mcmc.diagnostics.ess[d.index(f"pi[{k}]")] > 1000


def test_anesthesia_converged(anesthesia_mcmc):
    assert np.nanmax(anesthesia_mcmc.diagnostics.rhat) < 1.01
    assert anesthesia_mcmc.diagnostics.degenerate == []


def test_divergence_warning():
    draws = mcmc.PosteriorDraws(np.random.default_rng(0).normal(size=(2, 10, 1)), ["x"])
    stats = [{"divergences": 2, "accept_rate": 0.5, "step_size": 0.1, "n_leapfrog": 3}] * 2
    assert mcmc.diagnose(draws, stats).warnings
    stats = [{"divergences": 1, "accept_rate": 0.5, "step_size": 0.1, "n_leapfrog": 3}] * 2
    assert not mcmc.diagnose(draws, stats).warnings


def test_diagnostics_dict_round_trip(anesthesia_mcmc):
    d = anesthesia_mcmc.diagnostics
    back = mcmc.Diagnostics.from_dict(d.to_dict())
    assert back.to_dict() == d.to_dict()


def test_chain_rngs_independent():
    a, b = mcmc.chain_rngs(1, 2)
    assert a.random() != b.random()
    again = mcmc.chain_rngs(1, 2)[1]
    assert mcmc.chain_rngs(1, 2)[0].random() == mcmc.chain_rngs(1, 2)[0].random()
    assert again.random() == mcmc.chain_rngs(1, 2)[1].random()


def test_draws_accessors():
    v = np.arange(12.0).reshape(2, 3, 2)
    d = mcmc.PosteriorDraws(v, ["a", "b"])
    assert (d.n_chains, d.n_draws) == (2, 3)
    np.testing.assert_array_equal(d["b"], v[:, :, 1])
    assert d.flat().shape == (6, 2)


def test_fit_seed_fills_config():
    d = random_long(np.random.default_rng(13), 10, 2, 2)
    cfg = rf.SamplerConfig(chains=1, warmup=50, draws=20)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = rf.fit(d, config=cfg, seed=4)
        b = rf.fit(d, config=cfg, seed=4)
    np.testing.assert_array_equal(a.draws.values, b.draws.values)
    assert a.settings["seed"] == 4


def test_hierarchical_recovers_partially_pooled_raters():
    from raterfit.posterior import simulate_ratings

    rng = np.random.default_rng(21)
    K, J, I = 2, 6, 300
    # rater accuracies scattered around a shared population value
    acc = 1 / (1 + np.exp(-(1.7 + 0.4 * rng.normal(size=(J, K)))))
    theta = np.empty((J, K, K))
    theta[:, :, :] = ((1 - acc) / (K - 1))[:, :, None]
    theta[:, np.arange(K), np.arange(K)] = acc
    truth = rf.DsParams([0.6, 0.4], theta)
    sim = simulate_ratings(truth, [(i, j) for i in range(1, I + 1) for j in range(1, J + 1)], seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = rf.fit(sim, "hierarchical", config=rf.SamplerConfig(chains=2, warmup=400, draws=400), seed=2)
    d = res.diagnostics
    assert np.all(np.isfinite(d.rhat)) and np.all(np.isfinite(d.ess))
    assert np.max(d.rhat) < 1.05
    est = rf.point_estimate(res, "theta").value.reshape(J, K, K)
    assert np.all(np.abs(est - theta) <= 0.1)
    assert np.all(np.abs(rf.point_estimate(res, "pi").value - truth.pi) <= 0.1)
