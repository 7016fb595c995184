import itertools
import math

import numpy as np
import pytest
from scipy import stats

import raterfit as rf
from raterfit import dataset as ds
from raterfit import likelihood as L
from raterfit.errors import DomainError, NumericalError
from raterfit.model import resolve_spec

from conftest import SMALL_LONG, random_ds_params, random_long, text


def brute_force_loglik(params, long):
    """Sum the joint probability over every assignment of true classes."""
    theta = params.error_matrices
    K = params.pi.shape[0]
    I = long.n_items
    rows = list(zip(long.item.tolist(), long.rater.tolist(), long.rating.tolist()))
    total = 0.0
    for z in itertools.product(range(K), repeat=I):
        p = 1.0
        for i in range(I):
            p *= params.pi[z[i]]
        for i, j, y in rows:
            p *= theta[j, z[i], y]
        total += p
    return math.log(total)


def test_hand_value_single_rating():
    d = ds.parse_long(text("1,1,1\n1,1,1\n"), n_categories=2)
    p = rf.DsParams([0.5, 0.5], [[[1.0, 0.0], [0.0, 1.0]]])
    assert L.log_likelihood(p, d) == pytest.approx(math.log(0.5), abs=1e-15)
    p = rf.DsParams([0.5, 0.5], [[[0.5, 0.5], [0.5, 0.5]]])
    assert L.log_likelihood(p, d) == pytest.approx(2 * math.log(0.5), abs=1e-15)


def test_hand_value_small_long():
    d = ds.parse_long(text(SMALL_LONG))
    K = 4
    th = np.full((2, K, K), 0.1)
    th[:, np.arange(K), np.arange(K)] = 0.7
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    p = rf.DsParams(pi, th)
    # item 1 rated (3, 4), items 2 and 3 rated (2, 2)
    i1 = sum(pi[k] * th[0, k, 2] * th[1, k, 3] for k in range(K))
    i2 = sum(pi[k] * th[0, k, 1] * th[1, k, 1] for k in range(K))
    assert L.log_likelihood(p, d) == pytest.approx(math.log(i1) + 2 * math.log(i2), abs=1e-13)


@pytest.mark.parametrize("seed", range(12))
def test_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    I, J, K = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(2, 4))
    d = random_long(rng, I, J, K)
    p = random_ds_params(rng, K, J)
    assert L.log_likelihood(p, d) == pytest.approx(brute_force_loglik(p, d), abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_enumeration_oracle_class_conditional(seed):
    rng = np.random.default_rng(100 + seed)
    I, J, K = 3, 2, 3
    d = random_long(rng, I, J, K)
    p = rf.CcParams(rng.dirichlet(np.ones(K)), rng.uniform(0.05, 0.95, (J, K)))
    assert L.log_likelihood(p, d) == pytest.approx(brute_force_loglik(p, d), abs=1e-12)


def test_grouped_equals_long_caries(caries):
    rng = np.random.default_rng(3)
    long = ds.to_long(caries)
    for _ in range(20):
        p = random_ds_params(rng, 2, 5)
        a = L.log_likelihood_grouped(p, caries)
        b = L.log_likelihood_long(p, long)
        assert abs(a - b) <= 1e-8 * max(1.0, abs(b))


def test_grouped_tally_linearity():
    rng = np.random.default_rng(5)
    g = ds.parse_grouped(text("1,2,n\n1,1,3\n2,1,4\n"))
    g2 = ds.parse_grouped(text("1,2,n\n1,1,6\n2,1,8\n"))
    for _ in range(5):
        p = random_ds_params(rng, 2, 2)
        assert L.log_likelihood(p, g2) == pytest.approx(2 * L.log_likelihood(p, g), abs=1e-12)


def test_wide_equals_long():
    rng = np.random.default_rng(9)
    w = ds.parse_wide(text("item,1,2\n1,3,4\n2,2,2\n3,2,NA\n"))
    p = random_ds_params(rng, 4, 2)
    assert L.log_likelihood(p, w) == pytest.approx(L.log_likelihood(p, ds.to_long(w)), abs=1e-13)


def test_item_order_invariance():
    rng = np.random.default_rng(11)
    d = random_long(rng, 6, 3, 3)
    perm = rng.permutation(6)
    d2 = rf.LongRatings(
        n_categories=3, rater_labels=d.rater_labels, item=perm[d.item], rater=d.rater, rating=d.rating,
        item_labels=d.item_labels,
    )
    p = random_ds_params(rng, 3, 3)
    assert L.log_likelihood(p, d) == pytest.approx(L.log_likelihood(p, d2), abs=1e-12)


def test_label_permutation_equivariance():
    rng = np.random.default_rng(12)
    d = random_long(rng, 8, 3, 3)
    p = random_ds_params(rng, 3, 3)
    perm = np.array([2, 0, 1])
    q = rf.DsParams(p.pi[perm], p.theta[:, perm, :])
    assert L.log_likelihood(p, d) == pytest.approx(L.log_likelihood(q, d), abs=1e-12)


def test_tiny_probabilities_are_stable():
    d = ds.parse_long(text("1,1,1\n1,2,2\n2,1,2\n"), n_categories=2)
    th = np.array([[[1 - 1e-300, 1e-300], [1e-300, 1 - 1e-300]]] * 2)
    p = rf.DsParams([0.5, 0.5], th)
    v = L.log_likelihood(p, d)
    assert np.isfinite(v)
    # item 1: both classes give 0.5 * 1e-300; item 2: about 0.5
    assert v == pytest.approx(math.log(1e-300) + math.log(0.5), rel=1e-12)


def test_exact_zero_in_unobserved_cell():
    d = ds.parse_long(text("1,1,1\n2,1,1\n"), n_categories=3)
    th = np.array([[[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]])
    p = rf.DsParams([0.2, 0.3, 0.5], th)
    expect = 2 * math.log(0.2 + 0.15 + 0.1)
    for backend in L.kernel_class.__globals__["AVAILABLE"]:
        data = L.compile_data(d)
        k = data.kernel(backend)
        with np.errstate(divide="ignore"):
            lj = k.log_joint(np.log(p.pi), np.log(th))
        assert np.all(np.isfinite(lj))
    assert L.log_likelihood(p, d) == pytest.approx(expect, abs=1e-13)


def test_impossible_data_gives_minus_infinity():
    d = ds.parse_long(text("1,1,2\n"), n_categories=2)
    p = rf.DsParams([0.5, 0.5], [[[1.0, 0.0], [1.0, 0.0]]])
    assert L.log_likelihood(p, d) == -np.inf


# --- priors -----------------------------------------------------------------


def test_dirichlet_uniform_prior_is_zero():
    spec = resolve_spec("dawid_skene", 2, 1, {"alpha": [1, 1], "N": 2, "p": 0.5})
    p = rf.DsParams([0.3, 0.7], [[[0.9, 0.1], [0.4, 0.6]]])
    assert L.log_prior(p, spec) == pytest.approx(0.0, abs=1e-15)


def test_dirichlet_prior_oracle():
    spec = resolve_spec("dawid_skene", 3, 2)
    rng = np.random.default_rng(2)
    p = random_ds_params(rng, 3, 2)
    expect = stats.dirichlet.logpdf(p.pi, spec.prior.alpha)
    for j in range(2):
        for k in range(3):
            expect += stats.dirichlet.logpdf(p.theta[j, k], spec.prior.beta[j, k])
    assert L.log_prior(p, spec) == pytest.approx(expect, abs=1e-10)


def test_beta_prior_oracle():
    spec = resolve_spec("class_conditional", 2, 1)
    p = rf.CcParams([0.5, 0.5], [[0.8, 0.6]])

    def beta_logpdf(x, a, b):
        return math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + (a - 1) * math.log(x) + (b - 1) * math.log(1 - x)

    expect = math.lgamma(6) - 2 * math.lgamma(3) + 2 * 2 * math.log(0.5)
    expect += beta_logpdf(0.8, 4.8, 3.2) + beta_logpdf(0.6, 4.8, 3.2)
    assert L.log_prior(p, spec) == pytest.approx(expect, abs=1e-12)


def test_half_normal_and_normal_prior():
    spec = resolve_spec("hierarchical", 2, 1, {"alpha": [1, 1]})
    p = rf.HdsParams([0.5, 0.5], np.zeros((2, 2)), np.ones((2, 2)), np.zeros((1, 2, 2)))
    phi0 = -0.5 * math.log(2 * math.pi)
    half_normal = math.log(2) - 0.5 + phi0  # log(2 * phi(1))
    expect = 4 * phi0 + 4 * half_normal + 4 * phi0
    assert L.log_prior(p, spec) == pytest.approx(expect, abs=1e-12)
    assert half_normal == pytest.approx(math.log(2 * stats.norm.pdf(1.0)), abs=1e-15)


def test_prior_type_mismatch():
    spec = resolve_spec("class_conditional", 2, 1)
    with pytest.raises(TypeError):
        L.log_prior(rf.DsParams([0.5, 0.5], [[[0.5, 0.5], [0.5, 0.5]]]), spec)


# --- parameter checks and transforms ---------------------------------------


def test_parameter_domain_checks():
    with pytest.raises(DomainError):
        rf.DsParams([0.6, 0.6], [[[0.5, 0.5], [0.5, 0.5]]])
    with pytest.raises(DomainError):
        rf.DsParams([0.5, 0.5], [[[0.7, 0.5], [0.5, 0.5]]])
    with pytest.raises(DomainError):
        rf.CcParams([0.5, 0.5], [[1.2, 0.5]])
    with pytest.raises(DomainError):
        rf.HdsParams([0.5, 0.5], np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((1, 2, 2)))


def test_boundary_cannot_be_transformed():
    spec = resolve_spec("dawid_skene", 2, 1)
    with pytest.raises(DomainError):
        L.to_unconstrained(rf.DsParams([1.0, 0.0], [[[0.5, 0.5], [0.5, 0.5]]]), spec)
    spec = resolve_spec("class_conditional", 2, 1)
    with pytest.raises(DomainError):
        L.to_unconstrained(rf.CcParams([0.5, 0.5], [[1.0, 0.5]]), spec)


def test_alr_value():
    spec = resolve_spec("dawid_skene", 2, 1)
    v = L.to_unconstrained(rf.DsParams([0.8, 0.2], [[[0.5, 0.5], [0.5, 0.5]]]), spec)
    assert v[0] == pytest.approx(math.log(4), abs=1e-15)
    assert v[1] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("variant", ["dawid_skene", "class_conditional", "hierarchical"])
def test_transform_round_trip(variant):
    rng = np.random.default_rng(4)
    spec = resolve_spec(variant, 3, 2)
    lay = L.Layout(spec)
    for _ in range(10):
        v = rng.normal(size=lay.n_free)
        params = lay.from_unconstrained(v)
        np.testing.assert_allclose(lay.to_unconstrained(params), v, atol=1e-10)
        np.testing.assert_allclose(lay.pack(lay.unpack(lay.pack(params))), lay.pack(params), atol=0)


def test_layout_names():
    lay = L.Layout(resolve_spec("dawid_skene", 2, 1))
    assert lay.names == ["pi[1]", "pi[2]", "theta[1,1,1]", "theta[1,1,2]", "theta[1,2,1]", "theta[1,2,2]"]
    lay = L.Layout(resolve_spec("class_conditional", 2, 2))
    assert lay.names[-1] == "p[2,2]"


# --- unconstrained density ---------------------------------------------------


def _toy(variant, rng, I=7, J=3, K=3):
    d = random_long(rng, I, J, K)
    return resolve_spec(variant, K, J), d


@pytest.mark.parametrize("variant", ["dawid_skene", "class_conditional", "hierarchical"])
@pytest.mark.parametrize("jacobian", [True, False])
def test_gradient_matches_finite_differences(variant, jacobian):
    rng = np.random.default_rng(21)
    spec, d = _toy(variant, rng)
    post = L.Posterior(spec, d)
    h = 1e-5
    for _ in range(20):
        v = rng.normal(scale=0.8, size=post.dim)
        _, g = post.log_density(v, jacobian)
        fd = np.empty_like(v)
        for c in range(v.size):
            e = np.zeros_like(v)
            e[c] = h
            fd[c] = (post.log_density(v + e, jacobian)[0] - post.log_density(v - e, jacobian)[0]) / (2 * h)
        err = np.abs(g - fd) / np.maximum(1.0, np.abs(fd))
        assert err.max() < 1e-6


@pytest.mark.parametrize("variant", ["dawid_skene", "class_conditional", "hierarchical"])
def test_density_is_posterior_plus_jacobian(variant):
    rng = np.random.default_rng(22)
    spec, d = _toy(variant, rng)
    post = L.Posterior(spec, d)
    for _ in range(5):
        v = rng.normal(size=post.dim)
        params = post.layout.from_unconstrained(v)
        lp = L.log_posterior(params, spec, d)
        assert post.log_density(v)[0] == pytest.approx(lp + post.log_jacobian(v), abs=1e-9)


def test_jacobian_matches_numerical_determinant():
    # pi only: K=3 simplex, the ALR map has a 2x2 Jacobian on the free coordinates
    u = np.array([0.3, -0.4])
    x = L._alr_inv(u)
    h = 1e-6
    J = np.empty((2, 2))
    for c in range(2):
        e = np.zeros(2)
        e[c] = h
        J[:, c] = (L._alr_inv(u + e)[:2] - L._alr_inv(u - e)[:2]) / (2 * h)
    assert np.log(np.linalg.det(J)) == pytest.approx(np.log(x).sum(), abs=1e-8)


def test_grouped_density_matches_long(caries):
    spec = resolve_spec("dawid_skene", 2, 5)
    a = L.Posterior(spec, caries)
    b = L.Posterior(spec, ds.to_long(caries))
    rng = np.random.default_rng(0)
    for _ in range(3):
        v = rng.normal(size=a.dim)
        va, ga = a.log_density(v)
        vb, gb = b.log_density(v)
        assert va == pytest.approx(vb, rel=1e-10)
        np.testing.assert_allclose(ga, gb, rtol=1e-8, atol=1e-8)


def test_non_finite_density_raises():
    spec, d = _toy("dawid_skene", np.random.default_rng(0))
    post = L.Posterior(spec, d)
    v = np.zeros(post.dim)
    v[0] = 1e308
    with pytest.raises(NumericalError), np.errstate(all="ignore"):
        post.log_density(v * 10)
