"""Model variants and their prior hyper-parameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from raterfit.dataset import LongRatings, RatingDataset, to_long
from raterfit.errors import DomainError, ShapeError

VARIANTS = ("dawid_skene", "class_conditional", "hierarchical", "homogeneous")

DEFAULT_N = 8.0
DEFAULT_P = 0.6
DEFAULT_ALPHA = 3.0

_ALIASES = {v.replace("_", "-"): v for v in VARIANTS}


def canonical_variant(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown model {name!r}; expected one of {VARIANTS}")
    return name


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DirichletPrior:
    """Dirichlet(alpha) on the prevalence, Dirichlet(beta[j, k]) on each error-matrix row."""

    alpha: np.ndarray
    beta: np.ndarray  # (J, K, K)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "beta", _frozen(self.beta))
        k = self.alpha.shape[0]
        if self.beta.ndim != 3 or self.beta.shape[1:] != (k, k):
            raise ShapeError(f"beta must have shape (J, {k}, {k}), got {self.beta.shape}")
        if np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise DomainError("Dirichlet hyper-parameters must be positive")


@dataclass(frozen=True)
class PseudocountSpec:
    N: float = DEFAULT_N
    p: float = DEFAULT_P

    def __post_init__(self):
        if not self.N > 0:
            raise DomainError(f"pseudo-sample size N must be positive, got {self.N}")
        if not 0 < self.p < 1:
            raise DomainError(f"assumed accuracy p must lie in (0, 1), got {self.p}")


@dataclass(frozen=True, eq=False)
class ClassConditionalPrior:
    """Dirichlet(alpha) on the prevalence, Beta(beta1[k], beta2[k]) on each p[j, k]."""

    alpha: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta1", "beta2"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        k = self.alpha.shape[0]
        if self.beta1.shape != (k,) or self.beta2.shape != (k,):
            raise ShapeError(f"beta1 and beta2 must have length {k}")
        if np.any(self.alpha <= 0) or np.any(self.beta1 <= 0) or np.any(self.beta2 <= 0):
            raise DomainError("hyper-parameters must be positive")


@dataclass(frozen=True, eq=False)
class HierarchicalPrior:
    """Normal(0, 1) on mu, half-normal(0, 1) on sigma, Normal(mu, sigma) on gamma.

    The scales are fixed; only the prevalence prior is configurable.
    """

    alpha: np.ndarray
    mu_scale: float = 1.0
    sigma_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        if np.any(self.alpha <= 0):
            raise DomainError("hyper-parameters must be positive")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    variant: str
    n_categories: int
    n_raters: int
    prior: object
    # which hyper-parameters the user supplied, for reporting
    custom: frozenset = field(default_factory=frozenset)

    @property
    def K(self) -> int:
        return self.n_categories

    @property
    def J(self) -> int:
        return self.n_raters

    @property
    def likelihood_variant(self) -> str:
        """The likelihood family actually evaluated (homogeneous is plain DS on relabelled data)."""
        return "dawid_skene" if self.variant == "homogeneous" else self.variant

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "K": self.K, "J": self.J, "custom": sorted(self.custom)}
        for f in dataclasses.fields(self.prior):
            v = getattr(self.prior, f.name)
            d[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        variant = d["variant"]
        if variant in ("dawid_skene", "homogeneous"):
            prior = DirichletPrior(d["alpha"], d["beta"])
        elif variant == "class_conditional":
            prior = ClassConditionalPrior(d["alpha"], d["beta1"], d["beta2"])
        else:
            prior = HierarchicalPrior(d["alpha"], d.get("mu_scale", 1.0), d.get("sigma_scale", 1.0))
        return cls(variant, int(d["K"]), int(d["J"]), prior, frozenset(d.get("custom", ())))


def default_beta(K: int, N: float = DEFAULT_N, p: float = DEFAULT_P) -> np.ndarray:
    """K x K pseudocount matrix: ``N p`` on the diagonal, the remaining
    ``N (1 - p)`` spread evenly over each row's off-diagonal cells."""
    if K < 2:
        raise DomainError(f"need at least 2 categories, got K={K}")
    PseudocountSpec(N, p)
    beta = np.full((K, K), N * (1 - p) / (K - 1))
    np.fill_diagonal(beta, N * p)
    return beta


def stan_guide_equivalent(K: int) -> PseudocountSpec:
    """(N, p) reproducing the ``2.5 K`` diagonal / unit off-diagonal choice."""
    N = 3.5 * K - 1
    return PseudocountSpec(N=N, p=2.5 * K / N)


def _broadcast_beta(beta, K: int, J: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape == (K, K):
        return np.broadcast_to(beta, (J, K, K)).copy()
    if beta.shape == (J, K, K):
        return beta.copy()
    raise ShapeError(f"beta must be {K}x{K} or {J}x{K}x{K}, got shape {beta.shape}")


def resolve_spec(variant: str, K: int, J: int, overrides: dict | None = None) -> ModelSpec:
    """Fully numeric prior for ``variant``.

    ``overrides`` may contain ``alpha`` (length K), ``beta`` (K x K, broadcast
    to every rater, or J x K x K), ``N`` and ``p`` (pseudocount form), and for
    the class-conditional model ``beta1``/``beta2``.  Unknown keys raise.
    """
    variant = canonical_variant(variant)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    allowed = {"alpha", "beta", "N", "p", "beta1", "beta2"}
    unknown = set(overrides) - allowed
    if unknown:
        raise ValueError(f"unknown prior overrides: {sorted(unknown)}")
    if K < 2:
        raise DomainError(f"need at least 2 categories, got K={K}")
    if variant == "homogeneous":
        J = 1

    alpha = np.full(K, DEFAULT_ALPHA)
    if "alpha" in overrides:
        alpha = np.asarray(overrides["alpha"], dtype=float)
        if alpha.shape == ():
            alpha = np.full(K, float(alpha))
        if alpha.shape != (K,):
            raise ShapeError(f"alpha must have length {K}, got shape {alpha.shape}")
        if np.any(alpha <= 0):
            raise DomainError("alpha entries must be positive")

    pc = PseudocountSpec(float(overrides.get("N", DEFAULT_N)), float(overrides.get("p", DEFAULT_P)))
    custom = frozenset(overrides)

    if variant in ("dawid_skene", "homogeneous"):
        if "beta" in overrides:
            beta = _broadcast_beta(overrides["beta"], K, J)
        else:
            beta = _broadcast_beta(default_beta(K, pc.N, pc.p), K, J)
        return ModelSpec(variant, K, J, DirichletPrior(alpha, beta), custom)

    if variant == "class_conditional":
        b1 = np.broadcast_to(np.asarray(overrides.get("beta1", pc.N * pc.p), dtype=float), (K,)).copy()
        b2 = np.broadcast_to(np.asarray(overrides.get("beta2", pc.N * (1 - pc.p)), dtype=float), (K,)).copy()
        return ModelSpec(variant, K, J, ClassConditionalPrior(alpha, b1, b2), custom)

    extra = custom - {"alpha"}
    if extra:
        raise ValueError(f"the hierarchical model only accepts an alpha override, got {sorted(extra)}")
    return ModelSpec(variant, K, J, HierarchicalPrior(alpha), custom)


def check_offdiagonal_beta(spec: ModelSpec, method: str = "optim") -> list[str]:
    """Warnings for off-diagonal error-matrix pseudocounts below 1.

    Those make the MAP objective unbounded along the simplex boundary, so
    they only matter for optimisation; MCMC gets an empty list.
    """
    if method != "optim" or not isinstance(spec.prior, DirichletPrior):
        return []
    beta = spec.prior.beta
    off = ~np.eye(spec.K, dtype=bool)
    low = beta[:, off]
    if np.all(low >= 1):
        return []
    return [
        f"some off-diagonal beta hyper-parameters are below 1 (smallest {low.min():.4g}); "
        "optimisation may push error-matrix entries to 0. Use MCMC, or pass beta with "
        "off-diagonal entries of at least 1 (for example via a larger N or smaller p)."
    ]


def homogenize(dataset: RatingDataset) -> LongRatings:
    """Treat every rating as coming from one pooled rater."""
    long = to_long(dataset)
    if long.n_raters == 1:
        return long
    return LongRatings(
        n_categories=long.n_categories,
        rater_labels=("1",),
        item=long.item,
        rater=np.zeros_like(long.rater),
        rating=long.rating,
        item_labels=long.item_labels,
        source=long.source,
    )
