"""Adaptive Hamiltonian Monte Carlo over the marginalised posterior.

Each chain runs HMC with a diagonal mass matrix.  After warmup every
transition draws its leapfrog count uniformly from ``1..2n``, where ``n``
covers an integration time of ``trajectory_length`` in mass-scaled units;
a fixed count lets some parameters resonate and mix badly.

Warmup has three phases: step-size search by dual averaging (15%), a
sequence of doubling windows that estimate the mass matrix (60%), and a
final step-size polish (25%).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from raterfit.dataset import RatingDataset
from raterfit.diagnostics import effective_sample_size, split_rhat, summarize
from raterfit.errors import InitError, NumericalError
from raterfit.likelihood import Posterior
from raterfit.model import ModelSpec
from raterfit.optimize import init_params

log = logging.getLogger(__name__)

__all__ = [
    "SamplerConfig", "PosteriorDraws", "Diagnostics", "sample", "hmc_chain",
    "split_rhat", "effective_sample_size",
]

MAX_ENERGY_ERROR = 1000.0
INIT_RETRIES = 5


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    seed: int | None = None
    target_accept: float = 0.8
    max_leapfrog: int = 1024
    trajectory_length: float = 2.0
    init_radius: float = 0.5
    n_jobs: int = 1

    def __post_init__(self):
        if self.chains < 1 or self.warmup < 0 or self.draws < 1 or self.max_leapfrog < 1:
            raise ValueError("chains, draws and max_leapfrog must be positive and warmup non-negative")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "n_jobs"}


@dataclass
class PosteriorDraws:
    """Constrained-space draws, shape (chains, draws, parameters)."""

    values: np.ndarray
    names: list

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.names)}

    @property
    def n_chains(self):
        return self.values.shape[0]

    @property
    def n_draws(self):
        return self.values.shape[1]

    def flat(self) -> np.ndarray:
        """All chains stacked, shape (chains * draws, parameters)."""
        return self.values.reshape(-1, self.values.shape[2])

    def __getitem__(self, name) -> np.ndarray:
        return self.values[:, :, self._index[name]]

    def index(self, name) -> int:
        return self._index[name]


@dataclass
class Diagnostics:
    rhat: np.ndarray
    ess: np.ndarray
    divergences: list
    accept_rate: list
    step_size: list
    n_leapfrog: list
    degenerate: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rhat": [float(x) for x in self.rhat],
            "ess": [float(x) for x in self.ess],
            "divergences": [int(x) for x in self.divergences],
            "accept_rate": [float(x) for x in self.accept_rate],
            "step_size": [float(x) for x in self.step_size],
            "n_leapfrog": [int(x) for x in self.n_leapfrog],
            "degenerate": list(self.degenerate),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["rhat"], dtype=float), np.array(d["ess"], dtype=float), d["divergences"],
                   d["accept_rate"], d["step_size"], d["n_leapfrog"], d.get("degenerate", []), d.get("warnings", []))


# --------------------------------------------------------------------------
# the sampler


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, step, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10 * step)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.t = 0
        self.h_bar = 0.0
        self.log_step = math.log(step)
        self.log_step_bar = 0.0

    def update(self, accept):
        self.t += 1
        w = 1.0 / (self.t + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept)
        self.log_step = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        eta = self.t ** -self.kappa
        self.log_step_bar = eta * self.log_step + (1 - eta) * self.log_step_bar
        return math.exp(self.log_step)

    @property
    def final(self):
        return math.exp(self.log_step_bar)


def _safe(logp, q):
    try:
        f, g = logp(q)
    except (NumericalError, FloatingPointError, OverflowError):
        return -np.inf, None
    if not np.isfinite(f):
        return -np.inf, None
    return f, g


def _leapfrog(logp, q, p, g, step, n_steps, inv_mass):
    p = p + 0.5 * step * g
    f = -np.inf
    for i in range(n_steps):
        q = q + step * inv_mass * p
        f, g = _safe(logp, q)
        if g is None:
            return q, p, -np.inf, None
        if i < n_steps - 1:
            p = p + step * g
    p = p + 0.5 * step * g
    return q, p, f, g


def _transition(logp, q, f, g, step, n_steps, inv_mass, rng):
    p0 = rng.standard_normal(q.shape[0]) / np.sqrt(inv_mass)
    h0 = -f + 0.5 * np.dot(inv_mass * p0, p0)
    q1, p1, f1, g1 = _leapfrog(logp, q, p0, g, step, n_steps, inv_mass)
    if g1 is None:
        return q, f, g, 0.0, True
    h1 = -f1 + 0.5 * np.dot(inv_mass * p1, p1)
    err = h1 - h0
    if not np.isfinite(err) or err > MAX_ENERGY_ERROR:
        return q, f, g, 0.0, True
    accept = 1.0 if err <= 0 else math.exp(-err)
    if rng.uniform() < accept:
        return q1, f1, g1, accept, False
    return q, f, g, accept, False


def _reasonable_step(logp, q, f, g, inv_mass, rng, step=1.0):
    """Double or halve ``step`` until one leapfrog step crosses acceptance 1/2."""
    p0 = rng.standard_normal(q.shape[0]) / np.sqrt(inv_mass)
    h0 = -f + 0.5 * np.dot(inv_mass * p0, p0)

    def log_ratio(s):
        _, p1, f1, g1 = _leapfrog(logp, q, p0, g, s, 1, inv_mass)
        if g1 is None:
            return -np.inf
        return h0 - (-f1 + 0.5 * np.dot(inv_mass * p1, p1))

    threshold = math.log(0.5)
    lr = log_ratio(step)
    direction = 1 if lr > threshold else -1
    for _ in range(50):
        if (lr > threshold) != (direction == 1):
            break
        step *= 2.0 ** direction
        lr = log_ratio(step)
    return step


def _mass_windows(n):
    """Doubling window sizes filling ``n`` iterations; the last absorbs the rest."""
    sizes = []
    w = min(25, n)
    left = n
    while left > 0:
        if left < w + 2 * w:
            sizes.append(left)
            break
        sizes.append(w)
        left -= w
        w *= 2
    return sizes


def _n_steps(step, config):
    return int(min(config.max_leapfrog, max(1, math.ceil(config.trajectory_length / step))))


def hmc_chain(logp, q0, config: SamplerConfig, rng: np.random.Generator, on_progress=None):
    """Run one adaptive HMC chain on ``logp(q) -> (value, gradient)``.

    Returns a dict with unconstrained ``draws`` (draws x dim) and the
    chain's adaptation and acceptance statistics.
    """
    q = np.array(q0, dtype=float)
    f, g = _safe(logp, q)
    if g is None:
        raise InitError("log density is not finite at the initial point")
    dim = q.shape[0]
    inv_mass = np.ones(dim)
    step = _reasonable_step(logp, q, f, g, inv_mass, rng)
    da = _DualAveraging(step, config.target_accept)

    n_warm = config.warmup
    n_fast1 = int(0.15 * n_warm)
    n_fast2 = int(0.25 * n_warm)
    windows = _mass_windows(n_warm - n_fast1 - n_fast2)

    def run_adapting(n, collect=None):
        nonlocal q, f, g, step
        for _ in range(n):
            q, f, g, acc, _div = _transition(logp, q, f, g, step, _n_steps(step, config), inv_mass, rng)
            step = da.update(acc)
            if collect is not None:
                collect.append(q.copy())

    run_adapting(n_fast1)
    for w in windows:
        window = []
        run_adapting(w, window)
        x = np.asarray(window)
        c = x.shape[0]
        if c >= 3:
            var = x.var(axis=0, ddof=1)
            inv_mass = (c / (c + 5.0)) * var + 1e-3 * (5.0 / (c + 5.0))
        step = _reasonable_step(logp, q, f, g, inv_mass, rng, step)
        da = _DualAveraging(step, config.target_accept)
    run_adapting(n_fast2)
    if n_warm > 0:
        step = da.final
    if on_progress is not None:
        on_progress("warmup done")

    n_steps = _n_steps(step, config)
    draws = np.empty((config.draws, dim))
    accept = np.empty(config.draws)
    divergent = 0
    for s in range(config.draws):
        eps = step * rng.uniform(0.9, 1.1)
        n = int(rng.integers(1, 2 * n_steps + 1))
        q, f, g, acc, div = _transition(logp, q, f, g, eps, n, inv_mass, rng)
        draws[s] = q
        accept[s] = acc
        divergent += div
    return {
        "draws": draws,
        "accept_rate": float(accept.mean()),
        "divergences": divergent,
        "step_size": step,
        "n_leapfrog": n_steps,
        "inv_mass": inv_mass,
    }


def chain_rngs(seed, n_chains):
    """One independent generator per chain, derived from ``(seed, chain)``."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,))) for c in range(n_chains)]


def _initial_point(post: Posterior, base, rng, radius):
    for _ in range(INIT_RETRIES):
        q = base + rng.uniform(-radius, radius, size=base.shape[0])
        f, g = _safe(post.log_density, q)
        if g is not None and np.all(np.isfinite(g)):
            return q
    raise InitError(f"no finite starting point found after {INIT_RETRIES} attempts")


def sample(spec: ModelSpec, dataset: RatingDataset, config: SamplerConfig | None = None, *, progress=None):
    """Draw from the posterior of ``spec`` given ``dataset``.

    Returns ``(PosteriorDraws, Diagnostics)``; draws are stored in
    constrained coordinates.  ``progress(chain, message)`` receives one call
    per chain phase.
    """
    config = config or SamplerConfig()
    post = Posterior(spec, dataset)
    layout = post.layout
    base = layout.to_unconstrained(init_params(spec, post.dataset, "from-majority-vote"))
    rngs = chain_rngs(config.seed, config.chains)

    def run(c):
        rng = rngs[c]
        q0 = _initial_point(post, base, rng, config.init_radius)
        cb = (lambda msg: progress(c + 1, msg)) if progress else None
        out = hmc_chain(post.log_density, q0, config, rng, cb)
        out["constrained"] = np.array([post.constrain(v) for v in out["draws"]])
        if progress:
            progress(c + 1, "sampling done")
        return out

    if config.n_jobs > 1 and config.chains > 1:
        with ThreadPoolExecutor(config.n_jobs) as ex:
            results = list(ex.map(run, range(config.chains)))
    else:
        results = [run(c) for c in range(config.chains)]

    values = np.stack([r["constrained"] for r in results])
    draws = PosteriorDraws(values, list(layout.names))
    diag = diagnose(draws, results)
    return draws, diag


def diagnose(draws: PosteriorDraws, chain_stats=None) -> Diagnostics:
    if draws.n_draws >= 4:
        rhat, ess, degenerate = summarize(draws.values, draws.names)
    else:
        P = len(draws.names)
        rhat, ess, degenerate = np.full(P, np.nan), np.full(P, np.nan), []
    chain_stats = chain_stats or []
    divs = [r["divergences"] for r in chain_stats]
    warn = []
    total = draws.n_chains * draws.n_draws
    if divs and sum(divs) > 0.1 * total:
        warn.append(f"{sum(divs)} of {total} post-warmup transitions diverged")
    return Diagnostics(
        rhat=rhat,
        ess=ess,
        divergences=divs,
        accept_rate=[r["accept_rate"] for r in chain_stats],
        step_size=[r["step_size"] for r in chain_stats],
        n_leapfrog=[r["n_leapfrog"] for r in chain_stats],
        degenerate=degenerate,
        warnings=warn,
    )
