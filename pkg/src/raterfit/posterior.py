"""Latent-class probabilities, point estimates, intervals, prediction, WAIC.

Everything here speaks 1-based numbers to the caller: classes ``1..K``,
items ``1..I`` and raters ``1..J``, matching parameter names such as
``theta[1,2,3]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from raterfit.dataset import GroupedRatings, LongRatings, RatingDataset
from raterfit.errors import DomainError, NumericalError, ShapeError, StateError, UnsupportedError
from raterfit.likelihood import Layout, compile_data, prepare_dataset

__all__ = [
    "PointEstimate", "CredibleIntervals", "WaicResult",
    "conditional_z", "class_probabilities", "point_estimate", "posterior_interval",
    "simulate_ratings", "posterior_predict", "waic", "item_labels",
]


@dataclass(frozen=True)
class PointEstimate:
    which: str
    value: np.ndarray
    names: list
    note: str | None = None


@dataclass(frozen=True)
class CredibleIntervals:
    level: float
    names: list
    lower: np.ndarray
    upper: np.ndarray

    def __getitem__(self, name):
        i = self.names.index(name)
        return float(self.lower[i]), float(self.upper[i])


@dataclass(frozen=True)
class WaicResult:
    waic: float
    lppd: float
    p_waic: float
    pointwise: np.ndarray  # (I, 3): lppd_i, p_waic_i, elpd_i
    items: tuple


def item_labels(dataset: RatingDataset) -> tuple:
    if isinstance(dataset, GroupedRatings):
        return tuple(str(i + 1) for i in range(dataset.n_items))
    return tuple(dataset.item_labels)


# --------------------------------------------------------------------------
# class probabilities


def _normalize(lj):
    m = lj.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise NumericalError("a unit has zero probability under every class")
    e = np.exp(lj - m)
    return e / e.sum(axis=1, keepdims=True)


def _log_joint(kernel, pi, theta):
    with np.errstate(divide="ignore"):
        return kernel.log_joint(np.log(pi), np.log(theta))


def conditional_z(params, dataset: RatingDataset) -> np.ndarray:
    """``Pr(z_i = k | params, y)`` for every item, shape (I, K).

    Grouped data are scored per pattern and expanded so each item gets a row.
    """
    data = compile_data(dataset)
    theta = params.error_matrices
    if theta.shape != (data.n_raters, data.n_categories, data.n_categories):
        raise ShapeError(f"parameter shape {theta.shape} does not fit the data")
    probs = _normalize(_log_joint(data.kernel(), params.pi, theta))
    return probs[data.expand]


def _values(fit) -> np.ndarray:
    """Constrained parameter rows: all draws, or the single mode."""
    if fit.method == "mcmc":
        if fit.draws is None or fit.draws.values.size == 0:
            raise StateError("the fit holds no draws")
        return fit.draws.flat()
    if fit.mode is None:
        raise StateError("the fit holds no mode")
    return np.asarray(fit.mode)[None, :]


def rao_blackwell(spec, values, dataset: RatingDataset) -> np.ndarray:
    """Mean over parameter rows of the conditional class distribution."""
    values = np.atleast_2d(values)
    if values.shape[0] == 0:
        raise StateError("no draws to average")
    dataset = prepare_dataset(spec, dataset)
    data = compile_data(dataset)
    kernel = data.kernel()
    layout = Layout(spec)
    pis = layout.block(values, "pi")
    thetas = layout.error_matrices(values)
    acc = np.zeros((data.n_units, spec.K))
    for pi, theta in zip(pis, thetas):
        acc += _normalize(_log_joint(kernel, pi, theta))
    acc /= values.shape[0]
    return acc[data.expand]


def class_probabilities(fit, dataset: RatingDataset | None = None) -> np.ndarray:
    """Posterior class probabilities per item.

    MCMC fits average the conditional distribution over draws; optimisation
    fits condition on the mode.  Without ``dataset`` the table stored in the
    fit is returned.
    """
    if dataset is None:
        if fit.class_probs is None:
            raise StateError("the fit holds no class probabilities; pass the dataset")
        return fit.class_probs
    return rao_blackwell(fit.spec, _values(fit), dataset)


# --------------------------------------------------------------------------
# point estimates and intervals


def _block_draws(fit, which, values):
    """(rows, names, note) for a parameter block; ``theta`` is derived where needed."""
    layout = Layout(fit.spec)
    if which in layout.slices:
        sl, shape = layout.slices[which]
        return values[:, sl], layout.names[sl], None
    if which == "theta":
        theta = layout.error_matrices(values)
        names = [f"theta[{j + 1},{k + 1},{m + 1}]" for j, k, m in np.ndindex(*theta.shape[1:])]
        note = f"theta is derived from the {fit.spec.variant} parameterisation"
        return theta.reshape(values.shape[0], -1), names, note
    raise UnsupportedError(f"{which!r} is not a parameter of the {fit.spec.variant} model")


def point_estimate(fit, which: str) -> PointEstimate:
    """Means (MCMC) or modes (optimisation) of a parameter block; modal class for ``z``.

    ``z`` is the row-wise argmax of the class probabilities, with ties going
    to the smaller class.  Asking for ``theta`` from a class-conditional or
    hierarchical fit returns the implied error matrices and sets ``note``.
    """
    if which == "z":
        cp = class_probabilities(fit)
        return PointEstimate("z", np.argmax(cp, axis=1) + 1, [f"z[{i}]" for i in fit.item_labels])
    rows, names, note = _block_draws(fit, which, _values(fit))
    # one contiguous column at a time, so the mean is the plain column mean bit for bit
    mean = np.array([np.ascontiguousarray(rows[:, c]).mean() for c in range(rows.shape[1])])
    return PointEstimate(which, mean, names, note)


def posterior_interval(fit, level: float = 0.9, which: str | None = None) -> CredibleIntervals:
    """Central credible intervals from the draws.

    Endpoints are the ``(1 - level)/2`` and ``(1 + level)/2`` sample
    quantiles with linear interpolation between order statistics.
    """
    if fit.method != "mcmc":
        raise UnsupportedError("credible intervals are not available for optimisation fits")
    if not 0 < level < 1:
        raise DomainError("level must lie strictly between 0 and 1")
    values = _values(fit)
    if which is None:
        rows, names = values, list(fit.draws.names)
    else:
        rows, names, _ = _block_draws(fit, which, values)
    q = np.quantile(rows, [(1 - level) / 2, (1 + level) / 2], axis=0, method="linear")
    return CredibleIntervals(level, list(names), q[0], q[1])


# --------------------------------------------------------------------------
# simulation


def _categorical(rng, probs):
    """One draw per row of ``probs`` (last axis), returned 0-based."""
    u = rng.random(probs.shape[:-1])[..., None]
    out = (np.cumsum(probs, axis=-1) < u).sum(axis=-1)
    return np.minimum(out, probs.shape[-1] - 1)


def _design(design):
    d = np.asarray(design, dtype=np.int64)
    if d.ndim != 2 or d.shape[1] != 2 or d.shape[0] == 0:
        raise ShapeError("design must be a non-empty list of (item, rater) pairs")
    if np.any(d < 1):
        raise DomainError("items and raters are numbered from 1")
    return d - 1


def simulate_ratings(params, design, seed=None) -> LongRatings:
    """Ratings for an (item, rater) design from fixed parameters.

    Each distinct item gets one class drawn from ``pi``; every design row
    then draws a rating from that rater's error-matrix row.
    """
    rng = np.random.default_rng(seed)
    d = _design(design)
    theta = params.error_matrices
    K, J = theta.shape[1], theta.shape[0]
    if np.any(d[:, 1] >= J):
        raise DomainError(f"design names rater {d[:, 1].max() + 1}, but the parameters have {J}")
    items, item_idx = np.unique(d[:, 0], return_inverse=True)
    z = _categorical(rng, np.broadcast_to(params.pi, (items.size, K)))
    ratings = _categorical(rng, theta[d[:, 1], z[item_idx]])
    return LongRatings(
        n_categories=K,
        rater_labels=tuple(str(j + 1) for j in range(J)),
        item=item_idx,
        rater=d[:, 1],
        rating=ratings,
        item_labels=tuple(str(i + 1) for i in items),
    )


def posterior_predict(fit, design, seed=None, n_sims: int | None = None) -> np.ndarray:
    """Posterior predictive ratings, shape (n_sims, len(design)), classes 1..K.

    Simulation ``s`` uses draw ``s mod S`` (the mode for optimisation fits).
    Items already in the fitted data take their class from their
    class-probability row; higher item numbers are new and draw it from
    ``pi``.  One class is drawn per item per simulation.
    """
    if fit.spec.variant == "hierarchical":
        raise UnsupportedError("posterior prediction is available for the Dawid-Skene and class-conditional models")
    rng = np.random.default_rng(seed)
    d = _design(design)
    values = _values(fit)
    n_sims = values.shape[0] if n_sims is None else int(n_sims)
    if n_sims < 1:
        raise DomainError("n_sims must be positive")
    layout = Layout(fit.spec)
    rows = values[np.arange(n_sims) % values.shape[0]]
    pis = layout.block(rows, "pi")
    thetas = layout.error_matrices(rows)
    J, K = thetas.shape[1], fit.spec.K
    if fit.spec.variant == "homogeneous":
        d = d.copy()
        d[:, 1] = 0
    elif np.any(d[:, 1] >= J):
        raise DomainError(f"design names rater {d[:, 1].max() + 1}, but the model has {J}")
    items, item_idx = np.unique(d[:, 0], return_inverse=True)
    cp = class_probabilities(fit)
    known = items < cp.shape[0]
    probs = np.empty((n_sims, items.size, K))
    probs[:, known] = cp[items[known]][None]
    probs[:, ~known] = pis[:, None, :]
    z = _categorical(rng, probs)  # (n_sims, n_items)
    zz = z[:, item_idx]
    sims = np.arange(n_sims)[:, None]
    out = _categorical(rng, thetas[sims, d[None, :, 1], zz])
    return out + 1


# --------------------------------------------------------------------------
# WAIC


def pointwise_log_likelihood(spec, values, dataset: RatingDataset) -> np.ndarray:
    """Per-item marginal log-likelihood at each parameter row, shape (S, I)."""
    dataset = prepare_dataset(spec, dataset)
    data = compile_data(dataset)
    kernel = data.kernel()
    layout = Layout(spec)
    values = np.atleast_2d(values)
    pis = layout.block(values, "pi")
    thetas = layout.error_matrices(values)
    ll = np.empty((values.shape[0], data.n_units))
    for s, (pi, theta) in enumerate(zip(pis, thetas)):
        ll[s] = logsumexp(_log_joint(kernel, pi, theta), axis=1)
    return ll[:, data.expand]


def waic_from_loglik(ll: np.ndarray, items=None) -> WaicResult:
    """WAIC from an (S, I) matrix of pointwise log-likelihoods.

    ``p_waic`` uses the sample variance with ``S - 1`` in the denominator.
    """
    ll = np.asarray(ll, dtype=float)
    S = ll.shape[0]
    if S < 2:
        raise StateError("WAIC needs at least two draws")
    lppd_i = logsumexp(ll, axis=0) - np.log(S)
    # shifting by the first draw keeps identical draws at exactly zero variance
    p_i = (ll - ll[:1]).var(axis=0, ddof=1)
    table = np.column_stack([lppd_i, p_i, lppd_i - p_i])
    items = tuple(items) if items is not None else tuple(str(i + 1) for i in range(ll.shape[1]))
    lppd, p = float(lppd_i.sum()), float(p_i.sum())
    return WaicResult(-2.0 * (lppd - p), lppd, p, table, items)


def waic(fit, dataset: RatingDataset) -> WaicResult:
    """Item-level WAIC of an MCMC fit."""
    if fit.method != "mcmc":
        raise UnsupportedError("WAIC is not available for optimisation fits")
    ll = pointwise_log_likelihood(fit.spec, _values(fit), dataset)
    return waic_from_loglik(ll, item_labels(dataset))
