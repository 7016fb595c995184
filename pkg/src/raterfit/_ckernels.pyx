# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled likelihood kernels; same interface as ``raterfit._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


cdef class Kernel:
    cdef readonly str backend
    cdef readonly Py_ssize_t n_units, J, K, M
    cdef cnp.int64_t[::1] unit, rater, rating
    cdef double[::1] mult
    cdef readonly object weight
    cdef double[::1] _w

    def __init__(self, unit, rater, rating, mult, weight, Py_ssize_t n_units,
                 Py_ssize_t n_raters, Py_ssize_t n_categories):
        self.backend = "cython"
        self.unit = np.ascontiguousarray(unit, dtype=np.int64)
        self.rater = np.ascontiguousarray(rater, dtype=np.int64)
        self.rating = np.ascontiguousarray(rating, dtype=np.int64)
        self.mult = np.ascontiguousarray(mult, dtype=np.float64)
        self.weight = np.ascontiguousarray(weight, dtype=np.float64)
        self._w = self.weight
        self.M = self.unit.shape[0]
        self.n_units = n_units
        self.J = n_raters
        self.K = n_categories

    cdef void _fill(self, const double[::1] log_pi, const double[:, :, ::1] log_theta,
                    double[:, ::1] out) nogil:
        cdef Py_ssize_t u, k, m, j, y
        cdef double c
        for u in range(self.n_units):
            for k in range(self.K):
                out[u, k] = log_pi[k]
        for m in range(self.M):
            u = self.unit[m]
            j = self.rater[m]
            y = self.rating[m]
            c = self.mult[m]
            for k in range(self.K):
                out[u, k] += c * log_theta[j, k, y]

    def log_joint(self, log_pi, log_theta):
        """Per-unit ``log pi_k + sum_n log theta[j_n, k, y_n]``, shape (units, K)."""
        cdef const double[::1] lp = np.ascontiguousarray(log_pi, dtype=np.float64)
        cdef const double[:, :, ::1] lt = np.ascontiguousarray(log_theta, dtype=np.float64)
        out = np.empty((self.n_units, self.K))
        cdef double[:, ::1] o = out
        with nogil:
            self._fill(lp, lt, o)
        return out

    def loglik_grad(self, log_pi, log_theta):
        """Weighted marginal log-likelihood and its gradient w.r.t. log pi and log theta."""
        cdef const double[::1] lp = np.ascontiguousarray(log_pi, dtype=np.float64)
        cdef const double[:, :, ::1] lt = np.ascontiguousarray(log_theta, dtype=np.float64)
        cdef Py_ssize_t K = self.K
        lj = np.empty((self.n_units, K))
        g_pi = np.zeros(K)
        g_theta = np.zeros((self.J, K, K))
        cdef double[:, ::1] r = lj
        cdef double[::1] gp = g_pi
        cdef double[:, :, ::1] gt = g_theta
        cdef Py_ssize_t u, k, m, j, y
        cdef double mx, s, lse, w, c, value = 0.0
        with nogil:
            self._fill(lp, lt, r)
            for u in range(self.n_units):
                mx = r[u, 0]
                for k in range(1, K):
                    if r[u, k] > mx:
                        mx = r[u, k]
                s = 0.0
                for k in range(K):
                    r[u, k] = exp(r[u, k] - mx)
                    s += r[u, k]
                lse = mx + log(s)
                w = self._w[u]
                value += w * lse
                for k in range(K):
                    r[u, k] = r[u, k] * (w / s)
                    gp[k] += r[u, k]
            for m in range(self.M):
                u = self.unit[m]
                j = self.rater[m]
                y = self.rating[m]
                c = self.mult[m]
                for k in range(K):
                    gt[j, k, y] += c * r[u, k]
        return value, g_pi, g_theta
