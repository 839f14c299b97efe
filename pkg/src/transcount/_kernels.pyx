# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled accumulation of the augmented binary likelihood.

Walks every (observation, category) record implied by the counts without
materialising the long-format matrix.
"""

import numpy as np

from libc.math cimport exp, expm1, log, log1p, isfinite


cdef inline double _log_expit(double x) nogil:
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


def suff_stats(const long long[::1] y, const double[:, ::1] X, const double[:, ::1] coef,
               int link, bint want_derivs=True):
    """Log-likelihood and per-category score/weight sums.

    ``coef[s, 0]`` is the intercept at category ``s`` and ``coef[s, 1 + j]``
    the coefficient of covariate ``j``.  With ``z = (1, x_i)`` the returned
    ``U[s, c]`` is ``sum_i u_is z_c`` and ``W[s, c, d]`` is
    ``sum_i w_is z_c z_d`` over observations with ``y_i >= s``.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t S = coef.shape[0]
    cdef Py_ssize_t q = p + 1
    cdef Py_ssize_t i, s, c, d, yi
    cdef double eta, F, e, ratio, u, w, lf, lsf, ll = 0.0
    cdef double yt
    cdef double[::1] z = np.empty(q)
    cdef double[:, ::1] U
    cdef double[:, :, ::1] W
    if X.shape[0] != n:
        raise ValueError("X and y differ in length")
    if coef.shape[1] != q:
        raise ValueError("coef must have p + 1 columns")
    if want_derivs:
        U_arr = np.zeros((S, q))
        W_arr = np.zeros((S, q, q))
        U = U_arr
        W = W_arr
    z[0] = 1.0
    for i in range(n):
        yi = y[i]
        if yi >= S:
            raise ValueError(f"observation {i}: count {yi} exceeds largest category {S - 1}")
        for c in range(p):
            z[c + 1] = X[i, c]
        for s in range(yi + 1):
            eta = coef[s, 0]
            for c in range(p):
                eta += z[c + 1] * coef[s, c + 1]
            if not isfinite(eta):
                raise ValueError(f"non-finite linear predictor at record (obs={i}, category={s})")
            yt = 1.0 if s < yi else 0.0
            if link == 0:
                lf = _log_expit(eta)
                lsf = _log_expit(-eta)
                F = exp(lf)
                u = yt - F
                w = F * exp(lsf)
            else:
                e = exp(eta)
                F = -expm1(-e)
                lf = log(F)
                lsf = -e
                ratio = e / F
                u = ratio * (yt - F)
                w = ratio * exp(eta - e)
            ll += lf if s < yi else lsf
            if want_derivs:
                for c in range(q):
                    U[s, c] += u * z[c]
                    for d in range(c, q):
                        W[s, c, d] += w * z[c] * z[d]
    if not want_derivs:
        return ll, None, None
    for s in range(S):
        for c in range(q):
            for d in range(c):
                W[s, c, d] = W[s, d, c]
    return ll, U_arr, W_arr
