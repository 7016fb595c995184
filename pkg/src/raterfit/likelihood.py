"""Log-priors, marginal log-likelihoods, gradients and coordinate transforms.

The discrete true classes are summed out, so every density here is a
function of the continuous parameters only.  Three parameter families are
supported:

* ``DsParams``: prevalence ``pi`` and free error matrices ``theta``.
* ``CcParams``: ``pi`` and per-(rater, class) accuracies ``p``; the error
  matrix has ``p`` on the diagonal and ``(1 - p) / (K - 1)`` elsewhere.
* ``HdsParams``: ``pi`` with rater effects ``gamma ~ Normal(mu, sigma)``
  mapped to error-matrix rows by a softmax.

The unconstrained coordinates use the additive log-ratio (last category as
reference) for simplexes, logit for accuracies and log for scales.  The
hierarchical rater effects are stored non-centred, ``gamma = mu + sigma * eta``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import betaln, gammaln, log_softmax, logsumexp, softmax

from raterfit.dataset import GroupedRatings, RatingDataset, to_long
from raterfit.errors import DomainError, NumericalError, ShapeError
from raterfit.kernels import kernel_class
from raterfit.model import ModelSpec, homogenize

_LOG_2PI = np.log(2 * np.pi)
_SIMPLEX_TOL = 1e-8


def _check_simplex(a, what, axis=-1):
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or not np.all(np.abs(a.sum(axis=axis) - 1) < _SIMPLEX_TOL):
        raise DomainError(f"{what} must lie on the probability simplex")
    return a


@dataclass(frozen=True, eq=False)
class DsParams:
    pi: np.ndarray
    theta: np.ndarray  # (J, K, K); theta[j, k, k'] = Pr(rater j says k' | true class k)

    def __post_init__(self):
        object.__setattr__(self, "pi", _check_simplex(self.pi, "pi"))
        object.__setattr__(self, "theta", _check_simplex(self.theta, "theta rows"))
        K = self.pi.shape[0]
        if self.theta.ndim != 3 or self.theta.shape[1:] != (K, K):
            raise ShapeError(f"theta must have shape (J, {K}, {K}), got {self.theta.shape}")

    @property
    def error_matrices(self):
        return self.theta


@dataclass(frozen=True, eq=False)
class CcParams:
    pi: np.ndarray
    p: np.ndarray  # (J, K) probability of a correct rating

    def __post_init__(self):
        object.__setattr__(self, "pi", _check_simplex(self.pi, "pi"))
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.pi.shape[0]:
            raise ShapeError(f"p must have shape (J, {self.pi.shape[0]})")
        if np.any(p < 0) or np.any(p > 1):
            raise DomainError("p entries must lie in [0, 1]")
        object.__setattr__(self, "p", p)

    @property
    def error_matrices(self):
        J, K = self.p.shape
        theta = np.repeat(((1 - self.p) / (K - 1))[:, :, None], K, axis=2)
        idx = np.arange(K)
        theta[:, idx, idx] = self.p
        return theta


@dataclass(frozen=True, eq=False)
class HdsParams:
    pi: np.ndarray
    mu: np.ndarray  # (K, K)
    sigma: np.ndarray  # (K, K), positive
    gamma: np.ndarray  # (J, K, K)

    def __post_init__(self):
        object.__setattr__(self, "pi", _check_simplex(self.pi, "pi"))
        for name in ("mu", "sigma", "gamma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        K = self.pi.shape[0]
        if self.mu.shape != (K, K) or self.sigma.shape != (K, K) or self.gamma.shape[1:] != (K, K):
            raise ShapeError("mu/sigma must be KxK and gamma JxKxK")
        if np.any(self.sigma <= 0):
            raise DomainError("sigma entries must be positive")

    @property
    def error_matrices(self):
        return softmax(self.gamma, axis=2)


PARAM_TYPES = {"dawid_skene": DsParams, "class_conditional": CcParams, "hierarchical": HdsParams}


# --------------------------------------------------------------------------
# parameter layout


def _idx_names(prefix, shape):
    return [f"{prefix}[{','.join(str(i + 1) for i in ix)}]" for ix in np.ndindex(*shape)]


class Layout:
    """Flat constrained and unconstrained coordinates for a model spec.

    The constrained vector concatenates the parameter blocks in order
    (``pi``, then ``theta`` / ``p`` / ``mu, sigma, gamma``), each in C order.
    Names are 1-based, e.g. ``theta[1,2,3]``.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.variant = spec.likelihood_variant
        K, J = spec.K, spec.J
        self.K, self.J = K, J
        if self.variant == "dawid_skene":
            blocks = [("pi", (K,)), ("theta", (J, K, K))]
            self.n_free = (K - 1) + J * K * (K - 1)
        elif self.variant == "class_conditional":
            blocks = [("pi", (K,)), ("p", (J, K))]
            self.n_free = (K - 1) + J * K
        else:
            blocks = [("pi", (K,)), ("mu", (K, K)), ("sigma", (K, K)), ("gamma", (J, K, K))]
            self.n_free = (K - 1) + 2 * K * K + J * K * K
        self.blocks = blocks
        self.slices = {}
        start = 0
        for name, shape in blocks:
            size = int(np.prod(shape))
            self.slices[name] = (slice(start, start + size), shape)
            start += size
        self.size = start

    @cached_property
    def names(self) -> list[str]:
        out = []
        for name, shape in self.blocks:
            out.extend(_idx_names(name, shape))
        return out

    def block(self, flat, name):
        """View of one parameter block; ``flat`` may carry leading draw axes."""
        sl, shape = self.slices[name]
        flat = np.asarray(flat)
        return flat[..., sl].reshape(flat.shape[:-1] + shape)

    def pack(self, params) -> np.ndarray:
        return np.concatenate([np.ravel(getattr(params, name)) for name, _ in self.blocks])

    def unpack(self, flat):
        kw = {name: self.block(flat, name) for name, _ in self.blocks}
        return PARAM_TYPES[self.variant](**kw)

    def error_matrices(self, flat) -> np.ndarray:
        """theta for every row of ``flat`` (leading axes preserved)."""
        if self.variant == "dawid_skene":
            return self.block(flat, "theta")
        if self.variant == "class_conditional":
            p = self.block(flat, "p")
            K = self.K
            theta = np.repeat(((1 - p) / (K - 1))[..., None], K, axis=-1)
            idx = np.arange(K)
            theta[..., idx, idx] = p
            return theta
        return softmax(self.block(flat, "gamma"), axis=-1)

    # unconstrained coordinates -------------------------------------------

    def to_unconstrained(self, params) -> np.ndarray:
        parts = [_alr(params.pi)]
        if self.variant == "dawid_skene":
            parts.append(_alr(params.theta).ravel())
        elif self.variant == "class_conditional":
            p = params.p
            if np.any(p <= 0) or np.any(p >= 1):
                raise DomainError("p must lie strictly inside (0, 1)")
            parts.append(np.log(p) - np.log1p(-p))
        else:
            eta = (params.gamma - params.mu) / params.sigma
            parts += [params.mu.ravel(), np.log(params.sigma).ravel(), eta.ravel()]
        return np.concatenate([np.ravel(x) for x in parts])

    def split_free(self, v):
        K, J = self.K, self.J
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_free,):
            raise ShapeError(f"expected {self.n_free} unconstrained coordinates, got shape {v.shape}")
        out = {"pi": v[: K - 1]}
        rest = v[K - 1 :]
        if self.variant == "dawid_skene":
            out["theta"] = rest.reshape(J, K, K - 1)
        elif self.variant == "class_conditional":
            out["p"] = rest.reshape(J, K)
        else:
            out["mu"] = rest[: K * K].reshape(K, K)
            out["log_sigma"] = rest[K * K : 2 * K * K].reshape(K, K)
            out["eta"] = rest[2 * K * K :].reshape(J, K, K)
        return out

    def from_unconstrained(self, v):
        parts = self.split_free(v)
        pi = _alr_inv(parts["pi"])
        if self.variant == "dawid_skene":
            return DsParams(pi, _alr_inv(parts["theta"]))
        if self.variant == "class_conditional":
            return CcParams(pi, 1 / (1 + np.exp(-parts["p"])))
        sigma = np.exp(parts["log_sigma"])
        return HdsParams(pi, parts["mu"], sigma, parts["mu"] + sigma * parts["eta"])

    def free_names(self) -> list[str]:
        K, J = self.K, self.J
        names = [f"alr_pi[{k}]" for k in range(1, K)]
        if self.variant == "dawid_skene":
            names += _idx_names("alr_theta", (J, K, K - 1))
        elif self.variant == "class_conditional":
            names += _idx_names("logit_p", (J, K))
        else:
            names += _idx_names("mu", (K, K)) + _idx_names("log_sigma", (K, K)) + _idx_names("eta", (J, K, K))
        return names


def _alr(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("simplex entries must lie strictly inside (0, 1) to transform")
    return np.log(x[..., :-1]) - np.log(x[..., -1:])


def _alr_inv(u):
    u = np.asarray(u, dtype=float)
    full = np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)
    return softmax(full, axis=-1)


def _alr_log_inv(u):
    full = np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)
    return log_softmax(full, axis=-1)


def to_unconstrained(params, spec: ModelSpec) -> np.ndarray:
    return Layout(spec).to_unconstrained(params)


def from_unconstrained(v, spec: ModelSpec):
    return Layout(spec).from_unconstrained(v)


# --------------------------------------------------------------------------
# compiled data


@dataclass(frozen=True, eq=False)
class KernelData:
    """Ratings as (unit, rater, rating, multiplicity) with per-unit weights.

    A unit is an item for long data and a pattern for grouped data;
    ``expand`` maps items to units.
    """

    unit: np.ndarray
    rater: np.ndarray
    rating: np.ndarray
    mult: np.ndarray
    weight: np.ndarray
    expand: np.ndarray
    n_raters: int
    n_categories: int
    grouped: bool

    @property
    def n_units(self):
        return int(self.weight.shape[0])

    @property
    def n_items(self):
        return int(self.expand.shape[0])

    def kernel(self, backend=None):
        return kernel_class(backend)(
            self.unit, self.rater, self.rating, self.mult, self.weight,
            self.n_units, self.n_raters, self.n_categories,
        )


_COMPILED: "weakref.WeakKeyDictionary[RatingDataset, KernelData]" = weakref.WeakKeyDictionary()


def compile_data(dataset: RatingDataset) -> KernelData:
    cached = _COMPILED.get(dataset)
    if cached is not None:
        return cached
    K, J = dataset.n_categories, dataset.n_raters
    if isinstance(dataset, GroupedRatings):
        L = dataset.n_patterns
        data = KernelData(
            unit=np.repeat(np.arange(L), J),
            rater=np.tile(np.arange(J), L),
            rating=dataset.patterns.ravel().copy(),
            mult=np.ones(L * J),
            weight=dataset.counts.astype(float),
            expand=np.repeat(np.arange(L), dataset.counts),
            n_raters=J,
            n_categories=K,
            grouped=True,
        )
    else:
        long = to_long(dataset)
        key = (long.item * J + long.rater) * K + long.rating
        uniq, mult = np.unique(key, return_counts=True)
        data = KernelData(
            unit=uniq // (J * K),
            rater=(uniq // K) % J,
            rating=uniq % K,
            mult=mult.astype(float),
            weight=np.ones(long.n_items),
            expand=np.arange(long.n_items),
            n_raters=J,
            n_categories=K,
            grouped=False,
        )
    _COMPILED[dataset] = data
    return data


def prepare_dataset(spec: ModelSpec, dataset: RatingDataset) -> RatingDataset:
    """The data the likelihood sees: pooled to one rater for the homogeneous model."""
    if spec.variant == "homogeneous":
        dataset = homogenize(dataset)
    if dataset.n_raters != spec.J or dataset.n_categories != spec.K:
        raise ShapeError(
            f"dataset has J={dataset.n_raters}, K={dataset.n_categories}; model expects J={spec.J}, K={spec.K}"
        )
    return dataset


# --------------------------------------------------------------------------
# densities


def _dirichlet_logpdf(x, a):
    return gammaln(a.sum(axis=-1)) - gammaln(a).sum(axis=-1) + ((a - 1) * np.log(x)).sum(axis=-1)


def _unit_log_joint(params, data: KernelData):
    theta = params.error_matrices
    J, K = data.n_raters, data.n_categories
    if theta.shape != (J, K, K):
        raise ShapeError(f"parameters have theta shape {theta.shape}; data need ({J}, {K}, {K})")
    with np.errstate(divide="ignore"):
        return data.kernel().log_joint(np.log(params.pi), np.log(theta))


def item_log_likelihoods(params, dataset: RatingDataset) -> np.ndarray:
    """Per-unit marginal log-likelihood ``log sum_k pi_k prod theta``."""
    lj = _unit_log_joint(params, compile_data(dataset))
    return logsumexp(lj, axis=1)


def log_likelihood_long(params, dataset: RatingDataset) -> float:
    """Marginal log-likelihood summed over items of a long (or wide) dataset."""
    if isinstance(dataset, GroupedRatings):
        dataset = to_long(dataset)
    return float(item_log_likelihoods(params, dataset).sum())


def log_likelihood_grouped(params, dataset: GroupedRatings) -> float:
    """Marginal log-likelihood as a tally-weighted sum over rating patterns."""
    if not isinstance(dataset, GroupedRatings):
        raise TypeError("log_likelihood_grouped needs grouped data")
    data = compile_data(dataset)
    return float(data.weight @ logsumexp(_unit_log_joint(params, data), axis=1))


def log_likelihood(params, dataset: RatingDataset) -> float:
    if isinstance(dataset, GroupedRatings):
        return log_likelihood_grouped(params, dataset)
    return log_likelihood_long(params, dataset)


def log_prior(params, spec: ModelSpec) -> float:
    """Log prior density with all normalising constants included."""
    prior = spec.prior
    if not isinstance(params, PARAM_TYPES[spec.likelihood_variant]):
        raise TypeError(f"{type(params).__name__} does not match the {spec.variant} model")
    _check_simplex(params.pi, "pi")
    with np.errstate(divide="ignore"):
        lp = _dirichlet_logpdf(params.pi, prior.alpha)
        if isinstance(params, DsParams):
            _check_simplex(params.theta, "theta rows")
            lp += _dirichlet_logpdf(params.theta, prior.beta).sum()
        elif isinstance(params, CcParams):
            p = params.p
            lp += ((prior.beta1 - 1) * np.log(p) + (prior.beta2 - 1) * np.log1p(-p) - betaln(prior.beta1, prior.beta2)).sum()
        else:
            mu, sigma, gamma = params.mu, params.sigma, params.gamma
            lp += (-0.5 * mu**2 - 0.5 * _LOG_2PI).sum()
            lp += (np.log(2.0) - 0.5 * sigma**2 - 0.5 * _LOG_2PI).sum()
            z = (gamma - mu) / sigma
            lp += (-0.5 * z**2 - np.log(sigma) - 0.5 * _LOG_2PI).sum()
    return float(lp)


def log_posterior(params, spec: ModelSpec, dataset: RatingDataset) -> float:
    """Unnormalised log posterior; grouped data use the pattern form."""
    return log_prior(params, spec) + log_likelihood(params, dataset)


class Posterior:
    """Log density and gradient in unconstrained coordinates for one (spec, data) pair.

    ``jacobian=True`` gives the density of the unconstrained vector (what the
    sampler targets); ``jacobian=False`` drops the change-of-variables terms
    of the simplex, logit and log transforms so its mode is the mode in the
    natural coordinates.
    """

    def __init__(self, spec: ModelSpec, dataset: RatingDataset, backend=None):
        self.spec = spec
        self.dataset = prepare_dataset(spec, dataset)
        self.data = compile_data(self.dataset)
        self.kernel = self.data.kernel(backend)
        self.layout = Layout(spec)
        self.dim = self.layout.n_free
        prior = spec.prior
        self._alpha = prior.alpha
        self._const = float(gammaln(prior.alpha.sum()) - gammaln(prior.alpha).sum())
        v = self.layout.variant
        if v == "dawid_skene":
            self._const += float((gammaln(prior.beta.sum(-1)) - gammaln(prior.beta).sum(-1)).sum())
        elif v == "class_conditional":
            self._const -= float(spec.J * betaln(prior.beta1, prior.beta2).sum())
        else:
            K, J = spec.K, spec.J
            self._const += K * K * (-0.5 * _LOG_2PI) + K * K * (np.log(2.0) - 0.5 * _LOG_2PI)
            self._const += J * K * K * (-0.5 * _LOG_2PI)

    def __call__(self, v):
        return self.log_density(v)

    def log_density(self, v, jacobian: bool = True):
        """Return ``(value, gradient)`` at unconstrained point ``v``."""
        lay = self.layout
        parts = lay.split_free(v)
        jac = 1.0 if jacobian else 0.0
        K = lay.K
        log_pi = _alr_log_inv(parts["pi"])
        pi = np.exp(log_pi)
        value = self._const
        if lay.variant == "dawid_skene":
            log_theta = _alr_log_inv(parts["theta"])
            ll, g_lpi, g_lt = self.kernel.loglik_grad(log_pi, log_theta)
            beta = self.spec.prior.beta
            value += ll + ((beta - 1 + jac) * log_theta).sum()
            g_lt = g_lt + beta - 1 + jac
            theta = np.exp(log_theta)
            g_rows = g_lt[..., :-1] - theta[..., :-1] * g_lt.sum(axis=-1, keepdims=True)
            g_rest = g_rows.ravel()
        elif lay.variant == "class_conditional":
            x = parts["p"]
            log_p = -np.logaddexp(0.0, -x)
            log_q = -np.logaddexp(0.0, x)
            p = np.exp(log_p)
            log_theta = np.repeat((log_q - np.log(K - 1))[:, :, None], K, axis=2)
            idx = np.arange(K)
            log_theta[:, idx, idx] = log_p
            ll, g_lpi, g_lt = self.kernel.loglik_grad(log_pi, log_theta)
            pr = self.spec.prior
            b1 = pr.beta1 - 1 + jac
            b2 = pr.beta2 - 1 + jac
            value += ll + (b1 * log_p + b2 * log_q).sum()
            g_diag = g_lt[:, idx, idx]
            g_off = g_lt.sum(axis=2) - g_diag
            g_rest = ((g_diag + b1) * (1 - p) - (g_off + b2) * p).ravel()
        else:
            mu, log_sigma, eta = parts["mu"], parts["log_sigma"], parts["eta"]
            sigma = np.exp(log_sigma)
            gamma = mu + sigma * eta
            log_theta = log_softmax(gamma, axis=2)
            ll, g_lpi, g_lt = self.kernel.loglik_grad(log_pi, log_theta)
            theta = np.exp(log_theta)
            g_gamma = g_lt - theta * g_lt.sum(axis=2, keepdims=True)
            # eta ~ Normal(0, 1) already contains the gamma -> eta volume factor,
            # so that part is kept even when jacobian=False.
            value += ll - 0.5 * (mu**2).sum() - 0.5 * (sigma**2).sum() - 0.5 * (eta**2).sum()
            value += jac * log_sigma.sum()
            g_eta = g_gamma * sigma - eta
            g_mu = g_gamma.sum(axis=0) - mu
            g_ls = (g_gamma * eta).sum(axis=0) * sigma - sigma**2 + jac
            g_rest = np.concatenate([g_mu.ravel(), g_ls.ravel(), g_eta.ravel()])
        value += ((self._alpha - 1 + jac) * log_pi).sum()
        g_lpi = g_lpi + self._alpha - 1 + jac
        g_pi = g_lpi[:-1] - pi[:-1] * g_lpi.sum()
        grad = np.concatenate([g_pi, g_rest])
        if not np.isfinite(value):
            raise NumericalError("log density is not finite")
        bad = np.flatnonzero(~np.isfinite(grad))
        if bad.size:
            raise NumericalError(f"gradient is not finite at coordinate {int(bad[0])} ({lay.free_names()[bad[0]]})")
        return float(value), grad

    def log_jacobian(self, v) -> float:
        """log |d constrained / d unconstrained| for the transform."""
        lay = self.layout
        parts = lay.split_free(v)
        out = _alr_log_inv(parts["pi"]).sum()
        if lay.variant == "dawid_skene":
            out += _alr_log_inv(parts["theta"]).sum()
        elif lay.variant == "class_conditional":
            x = parts["p"]
            out += (-np.logaddexp(0.0, -x) - np.logaddexp(0.0, x)).sum()
        else:
            out += (1 + lay.J) * parts["log_sigma"].sum()
        return float(out)

    def constrain(self, v) -> np.ndarray:
        return self.layout.pack(self.layout.from_unconstrained(v))


def log_posterior_unconstrained(v, spec: ModelSpec, dataset: RatingDataset):
    """``(value, gradient)`` of the log posterior plus the transform log-Jacobian."""
    return Posterior(spec, dataset).log_density(v)
