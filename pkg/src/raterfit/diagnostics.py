"""Convergence diagnostics for multi-chain MCMC output."""

import numpy as np


def _as_chains(draws):
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("draws must have shape (chains, draws)")
    return x


def split_rhat(draws) -> float:
    """Split R-hat of one scalar parameter, ``draws`` shaped (chains, draws).

    Each chain is cut in half and the halves are treated as separate
    chains.  Returns ``inf`` when the within-chain variance is zero.  Values
    below 1 are sampling noise and are reported as 1.
    """
    x = _as_chains(draws)
    C, S = x.shape
    if S < 4:
        raise ValueError("need at least 4 draws per chain")
    half = S // 2
    parts = np.concatenate([x[:, :half], x[:, S - half:]], axis=0)
    n = half
    within = parts.var(axis=1, ddof=1).mean()
    if not within > 0 or np.all(parts.max(axis=1) == parts.min(axis=1)):
        return float("inf")
    between = n * parts.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * within + between / n
    return float(max(1.0, np.sqrt(var_plus / within)))


def _autocov(x):
    """Biased autocovariance of each row via FFT."""
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, n=size, axis=-1)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=-1)[..., :n]
    return acov / n


def effective_sample_size(draws) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence estimator.

    Capped at the total number of draws.  Returns ``nan`` for a parameter
    that never moves; chains that are each constant but disagree count as
    roughly one draw per two chains.
    """
    x = _as_chains(draws)
    C, n = x.shape
    if n < 4:
        raise ValueError("need at least 4 draws per chain")
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1) / n
    if C > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if not var_plus > 0 or x.max() == x.min():
        return float("nan")
    rho = 1 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum consecutive pairs while positive, forcing the pair sums to be monotone
    total = 0.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
    tau = -1.0 + 2.0 * total
    ess = C * n / max(tau, 1e-12)
    return float(min(ess, C * n))


def summarize(draws, names):
    """Per-parameter ``(rhat, ess)`` plus the list of degenerate parameters.

    ``draws`` has shape (chains, draws, parameters).
    """
    draws = np.asarray(draws)
    rhat = np.empty(draws.shape[2])
    ess = np.empty(draws.shape[2])
    degenerate = []
    for p in range(draws.shape[2]):
        rhat[p] = split_rhat(draws[:, :, p])
        ess[p] = effective_sample_size(draws[:, :, p])
        if not np.isfinite(rhat[p]) or not np.isfinite(ess[p]):
            degenerate.append(names[p])
    return rhat, ess, degenerate
