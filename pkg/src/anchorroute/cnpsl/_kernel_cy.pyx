# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernel for the cross-nested likelihood.

Mirrors ``_kernel_py.cnl_kernel`` loop for loop; see that module for the
contract. Selected automatically at import by ``anchorroute.cnpsl.kernel``.
"""

import numpy as np

from libc.math cimport exp, log, INFINITY

IMPLEMENTATION = "cython"


def cnl_kernel(double[:, ::1] v, double[:, :, ::1] lnalpha, double[:, ::1] mu,
               int[::1] n_routes, int[::1] n_nests, int[::1] chosen,
               bint need_grad=True):
    cdef Py_ssize_t n = lnalpha.shape[0]
    cdef Py_ssize_t jmax = lnalpha.shape[1]
    cdef Py_ssize_t mmax = lnalpha.shape[2]

    logp_arr = np.zeros(n)
    dv_arr = np.zeros((n, jmax))
    dmu_arr = np.zeros((n, mmax))
    ls_arr = np.empty(mmax)
    shift_arr = np.empty(mmax)
    nest_p_arr = np.empty(mmax)
    post_arr = np.empty(mmax)
    coeff_arr = np.empty(mmax)

    cdef double[::1] logp = logp_arr
    cdef double[:, ::1] dv = dv_arr
    cdef double[:, ::1] dmu = dmu_arr
    cdef double[::1] ls = ls_arr
    cdef double[::1] shift = shift_arr
    cdef double[::1] nest_p = nest_p_arr
    cdef double[::1] post = post_arr
    cdef double[::1] coeff = coeff_arr

    cdef Py_ssize_t o, j, m
    cdef int nj, nm, c
    cdef double mx, s, t, ln_d, ln_tc, acc

    for o in range(n):
        nj = n_routes[o]
        nm = n_nests[o]
        c = chosen[o]

        # log inclusive value per nest
        for m in range(nm):
            mx = -INFINITY
            for j in range(nj):
                t = lnalpha[o, j, m] + v[o, j]
                if t > mx:
                    mx = t
            if mx == -INFINITY:
                ls[m] = -INFINITY
            else:
                s = 0.0
                for j in range(nj):
                    t = lnalpha[o, j, m] + v[o, j]
                    if t != -INFINITY:
                        s += exp(t - mx)
                ls[m] = mx + log(s)

        # log denominator over nests
        mx = -INFINITY
        for m in range(nm):
            if ls[m] != -INFINITY:
                t = mu[o, m] * ls[m]
                if t > mx:
                    mx = t
        s = 0.0
        for m in range(nm):
            if ls[m] != -INFINITY:
                s += exp(mu[o, m] * ls[m] - mx)
        ln_d = mx + log(s)

        for m in range(nm):
            if ls[m] != -INFINITY:
                shift[m] = (mu[o, m] - 1.0) * ls[m]
            else:
                shift[m] = -INFINITY

        # chosen route's log cross-nest term
        mx = -INFINITY
        for m in range(nm):
            t = lnalpha[o, c, m] + shift[m]
            if t > mx:
                mx = t
        s = 0.0
        for m in range(nm):
            t = lnalpha[o, c, m] + shift[m]
            if t != -INFINITY:
                s += exp(t - mx)
        ln_tc = mx + log(s)

        logp[o] = v[o, c] + ln_tc - ln_d

        if not need_grad:
            continue

        for m in range(nm):
            if ls[m] != -INFINITY:
                nest_p[m] = exp(mu[o, m] * ls[m] - ln_d)
                t = lnalpha[o, c, m] + shift[m]
                post[m] = exp(t - ln_tc) if t != -INFINITY else 0.0
                coeff[m] = post[m] * (mu[o, m] - 1.0) - nest_p[m] * mu[o, m]
                dmu[o, m] = ls[m] * (post[m] - nest_p[m])
            else:
                nest_p[m] = 0.0
                post[m] = 0.0
                coeff[m] = 0.0
                dmu[o, m] = 0.0

        for j in range(nj):
            acc = 0.0
            for m in range(nm):
                if ls[m] != -INFINITY:
                    t = lnalpha[o, j, m] + v[o, j]
                    if t != -INFINITY:
                        acc += exp(t - ls[m]) * coeff[m]
            dv[o, j] = acc
        dv[o, c] += 1.0

    return logp_arr, dv_arr, dmu_arr
