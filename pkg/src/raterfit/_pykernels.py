"""Pure-numpy likelihood kernels (fallback when the compiled module is absent).

The data are folded into a unit-by-(rater, rating) count matrix once, so a
log-likelihood/gradient evaluation is two small matrix products.
"""

import numpy as np
from scipy import sparse

_DENSE_LIMIT = 2_000_000


class Kernel:
    backend = "python"

    def __init__(self, unit, rater, rating, mult, weight, n_units, n_raters, n_categories):
        K = n_categories
        cols = rater * K + rating
        shape = (n_units, n_raters * K)
        counts = sparse.csr_matrix((mult, (unit, cols)), shape=shape)
        self.counts = counts.toarray() if shape[0] * shape[1] <= _DENSE_LIMIT else counts
        self.weight = np.asarray(weight, dtype=float)
        self.n_units = n_units
        self.J = n_raters
        self.K = K

    def _flat_theta(self, log_theta):
        # (J, k, y) -> (J*y, k)
        return log_theta.transpose(0, 2, 1).reshape(self.J * self.K, self.K)

    def log_joint(self, log_pi, log_theta):
        """Per-unit ``log pi_k + sum_n log theta[j_n, k, y_n]``, shape (units, K)."""
        lt = self._flat_theta(log_theta)
        zero = np.isneginf(lt)
        if zero.any():
            # 0 * -inf would be nan; unobserved zero cells contribute nothing
            out = np.asarray(self.counts @ np.where(zero, 0.0, lt))
            hit = np.asarray(self.counts @ zero.astype(float)) > 0
            out[hit] = -np.inf
        else:
            out = np.asarray(self.counts @ lt)
        out += log_pi
        return out

    def loglik_grad(self, log_pi, log_theta):
        """Weighted marginal log-likelihood and its gradient w.r.t. log pi and log theta."""
        lj = self.log_joint(log_pi, log_theta)
        m = lj.max(axis=1, keepdims=True)
        e = np.exp(lj - m)
        s = e.sum(axis=1, keepdims=True)
        lse = (m + np.log(s))[:, 0]
        value = float(self.weight @ lse)
        r = e * (self.weight[:, None] / s)
        g_pi = r.sum(axis=0)
        g = self.counts.T @ r  # (J*y, k)
        g_theta = np.asarray(g).reshape(self.J, self.K, self.K).transpose(0, 2, 1)
        return value, g_pi, np.ascontiguousarray(g_theta)
