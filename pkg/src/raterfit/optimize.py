"""Posterior-mode (MAP) estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _sopt
from scipy.special import softmax

from raterfit.dataset import RatingDataset
from raterfit.errors import NumericalError, UnsupportedError
from raterfit.likelihood import CcParams, DsParams, HdsParams, Posterior, compile_data, log_prior, prepare_dataset
from raterfit.model import ModelSpec, check_offdiagonal_beta

EPS = 1e-8
INIT_STRATEGIES = ("uniform-diagonal", "jittered", "from-majority-vote")


@dataclass
class MapResult:
    params: object
    log_posterior: float
    converged: bool
    iterations: int
    warnings: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    method: str = "em"


@dataclass
class EmState:
    params: object
    responsibilities: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)


# --------------------------------------------------------------------------
# initial values


def _diag_theta(J, K, acc=0.7):
    theta = np.full((J, K, K), (1 - acc) / (K - 1))
    idx = np.arange(K)
    theta[:, idx, idx] = acc
    return theta


def majority_vote(dataset: RatingDataset) -> np.ndarray:
    """Per-unit plurality-vote responsibilities; ties share the mass equally."""
    data = compile_data(dataset)
    votes = np.zeros((data.n_units, data.n_categories))
    np.add.at(votes, (data.unit, data.rating), data.mult)
    top = votes == votes.max(axis=1, keepdims=True)
    return top / top.sum(axis=1, keepdims=True)


def _m_step(spec: ModelSpec, g_pi, g_theta, clamp_log=None):
    """Closed-form maximiser of the expected complete-data log posterior."""
    prior = spec.prior
    K = spec.K
    num_pi = prior.alpha - 1 + g_pi
    if np.any(num_pi <= 0) and clamp_log is not None:
        clamp_log.add("pi")
    pi = np.maximum(num_pi, EPS)
    pi /= pi.sum()
    if spec.likelihood_variant == "dawid_skene":
        num = prior.beta - 1 + g_theta
        if np.any(num <= 0) and clamp_log is not None:
            clamp_log.add("theta")
        theta = np.maximum(num, EPS)
        theta /= theta.sum(axis=2, keepdims=True)
        return DsParams(pi, theta)
    idx = np.arange(K)
    diag = g_theta[:, idx, idx]
    off = g_theta.sum(axis=2) - diag
    a = prior.beta1 - 1 + diag
    b = prior.beta2 - 1 + off
    if (np.any(a <= 0) or np.any(b <= 0)) and clamp_log is not None:
        clamp_log.add("p")
    a = np.maximum(a, EPS)
    b = np.maximum(b, EPS)
    return CcParams(pi, np.clip(a / (a + b), EPS, 1 - EPS))


def init_params(spec: ModelSpec, dataset: RatingDataset, strategy: str = "from-majority-vote", seed=None):
    """Starting point for optimisation or sampling.

    ``uniform-diagonal`` puts 0.7 on each error-matrix diagonal.
    ``from-majority-vote`` runs one M-step from plurality-vote class
    assignments.  ``jittered`` perturbs the uniform-diagonal point with
    seeded Dirichlet noise.
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"unknown init strategy {strategy!r}; expected one of {INIT_STRATEGIES}")
    dataset = prepare_dataset(spec, dataset)
    K, J = spec.K, spec.J
    variant = spec.likelihood_variant
    pi = np.full(K, 1.0 / K)
    theta = _diag_theta(J, K)
    if strategy == "from-majority-vote":
        data = compile_data(dataset)
        r = majority_vote(dataset) * data.weight[:, None]
        g_pi = r.sum(axis=0)
        g_theta = np.zeros((J, K, K))
        np.add.at(g_theta, (data.rater, slice(None), data.rating), data.mult[:, None] * r[data.unit])
        if variant == "hierarchical":
            # Dirichlet(2) smoothing stands in for the missing conjugate prior.
            pi = (g_pi + 1) / (g_pi + 1).sum()
            theta = (g_theta + 1) / (g_theta + 1).sum(axis=2, keepdims=True)
        else:
            p = _m_step(spec, g_pi, g_theta)
            pi, theta = p.pi, p.error_matrices
    elif strategy == "jittered":
        rng = np.random.default_rng(seed)
        pi = 0.8 * pi + 0.2 * rng.dirichlet(np.ones(K))
        theta = 0.8 * theta + 0.2 * rng.dirichlet(np.ones(K), size=(J, K))
    if variant == "dawid_skene":
        return DsParams(pi, theta)
    idx = np.arange(K)
    if variant == "class_conditional":
        return CcParams(pi, np.clip(theta[:, idx, idx], 0.05, 0.95))
    gamma = np.log(theta)
    gamma -= gamma.mean(axis=2, keepdims=True)
    mu = gamma.mean(axis=0)
    sigma = np.full((K, K), 0.5)
    return HdsParams(pi, mu, sigma, gamma)


# --------------------------------------------------------------------------
# EM


def em_fit(
    spec: ModelSpec,
    dataset: RatingDataset,
    init=None,
    tol: float = 1e-8,
    max_iter: int = 1000,
    *,
    init_strategy: str = "from-majority-vote",
    seed=None,
    callback=None,
) -> MapResult:
    """EM on the MAP objective for the Dawid-Skene, class-conditional and
    homogeneous models.

    Stops when the log posterior changes by less than ``tol`` between
    iterations.  ``callback(iteration, log_posterior)`` is called every
    iteration.
    """
    if spec.variant == "hierarchical":
        raise UnsupportedError("EM has no closed-form M-step for the hierarchical model; use gradient_map_fit")
    if not tol > 0:
        raise ValueError("tol must be positive")
    dataset = prepare_dataset(spec, dataset)
    kernel = compile_data(dataset).kernel()
    params = init if init is not None else init_params(spec, dataset, init_strategy, seed)
    warn = check_offdiagonal_beta(spec, "optim")
    clamped: set = set()
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(divide="ignore"):
            ll, g_pi, g_theta = kernel.loglik_grad(np.log(params.pi), np.log(params.error_matrices))
        lp = ll + log_prior(params, spec)
        if not np.isfinite(lp):
            raise NumericalError(f"log posterior became non-finite at EM iteration {it}")
        trace.append(lp)
        if callback is not None:
            callback(it, lp)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        params = _m_step(spec, g_pi, g_theta, clamped)
    if clamped:
        warn.append(
            f"M-step numerators for {', '.join(sorted(clamped))} were non-positive and clamped to {EPS:g}; "
            "some off-diagonal prior pseudocounts are below 1"
        )
    for w in warn:
        warnings.warn(w, stacklevel=2)
    return MapResult(params, trace[-1], converged, it, warn, trace, "em")


def responsibilities(params, dataset: RatingDataset) -> np.ndarray:
    """E-step: ``Pr(z = k | params, y)`` per unit."""
    data = compile_data(dataset)
    with np.errstate(divide="ignore"):
        lj = data.kernel().log_joint(np.log(params.pi), np.log(params.error_matrices))
    return softmax(lj, axis=1)


# --------------------------------------------------------------------------
# gradient ascent


def maximize(fun, x0, tol: float = 1e-6, max_iter: int = 1000):
    """Quasi-Newton (L-BFGS) ascent of ``fun(x) -> (value, gradient)``.

    Returns ``(x, value, converged, iterations)`` where convergence means the
    gradient max-norm fell below ``tol``.  On a line-search failure the best
    point seen so far is returned with ``converged=False``.
    """
    best = {"x": np.array(x0, dtype=float), "f": -np.inf}

    def neg(x):
        try:
            f, g = fun(x)
        except NumericalError:
            return np.inf, np.zeros_like(x)
        if f > best["f"]:
            best["x"], best["f"] = x.copy(), f
        return -f, -g

    res = _sopt.minimize(
        neg, np.array(x0, dtype=float), jac=True, method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0, "maxcor": 20, "maxls": 50},
    )
    x = res.x if np.isfinite(res.fun) and -res.fun >= best["f"] else best["x"]
    f, g = fun(x)
    converged = bool(np.max(np.abs(g)) < tol)
    return x, f, converged, int(res.nit)


def gradient_map_fit(
    spec: ModelSpec,
    dataset: RatingDataset,
    init=None,
    tol: float = 1e-6,
    max_iter: int = 1000,
    *,
    init_strategy: str = "from-majority-vote",
    seed=None,
) -> MapResult:
    """Posterior mode by quasi-Newton ascent in unconstrained coordinates.

    The transform Jacobian is left out, so for the Dawid-Skene and
    class-conditional models the mode matches ``em_fit``.  The hierarchical
    model is optimised over ``(pi, mu, sigma, eta)`` with
    ``gamma = mu + sigma * eta``.
    """
    post = Posterior(spec, dataset)
    params = init if init is not None else init_params(spec, dataset, init_strategy, seed)
    x0 = post.layout.to_unconstrained(params)
    x, f, converged, nit = maximize(lambda v: post.log_density(v, jacobian=False), x0, tol, max_iter)
    warn = check_offdiagonal_beta(spec, "optim")
    for w in warn:
        warnings.warn(w, stacklevel=2)
    if not converged:
        warn.append(f"gradient ascent stopped after {nit} iterations without reaching tol={tol:g}")
    return MapResult(post.layout.from_unconstrained(x), f, converged, nit, warn, [], "lbfgs")


def map_fit(spec: ModelSpec, dataset: RatingDataset, tol: float | None = None, **kw) -> MapResult:
    """EM where it has a closed form, gradient ascent otherwise."""
    if spec.variant == "hierarchical":
        return gradient_map_fit(spec, dataset, tol=1e-6 if tol is None else tol, **kw)
    return em_fit(spec, dataset, tol=1e-8 if tol is None else tol, **kw)
