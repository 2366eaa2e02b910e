"""Pure-numpy batch kernel for the cross-nested likelihood.

Same contract as the compiled kernel in ``_kernel_cy``: given padded
per-observation arrays, return the chosen-route log probability and, when
requested, its gradient with respect to each route's systematic utility
and each nest's scale. All inclusive-value sums are log-sum-exp
stabilized; impossible entries are encoded as -inf in ``lnalpha`` and
empty nests contribute nothing.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"


def _lse(a, axis):
    """Log-sum-exp along an axis; all--inf slices map to -inf."""
    amax = np.max(a, axis=axis)
    finite = np.isfinite(amax)
    safe = np.where(finite, amax, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = safe + np.log(np.sum(np.exp(a - np.expand_dims(safe, axis)), axis=axis))
    return np.where(finite, out, -np.inf)


def cnl_kernel(v, lnalpha, mu, n_routes, n_nests, chosen, need_grad=True):
    """Chosen-route log probabilities and gradients, batched.

    Parameters
    ----------
    v : (n, Jmax) systematic utilities, arbitrary at padded slots
    lnalpha : (n, Jmax, Mmax) log membership, -inf where alpha is 0 or padded
    mu : (n, Mmax) nest scales in (0, 1], arbitrary positive at pads
    n_routes, n_nests, chosen : (n,) int32 per-observation shapes and slot
    need_grad : skip gradient work when False

    Returns
    -------
    (logp, dv, dmu): (n,), (n, Jmax), (n, Mmax); gradient arrays are zero
    when need_grad is False.
    """
    n, jmax, mmax = lnalpha.shape
    idx = np.arange(n)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        a = lnalpha + v[:, :, None]
        ls = _lse(a, axis=1)  # (n, Mmax) log inclusive value per nest
        finite = np.isfinite(ls)
        b = np.where(finite, mu * ls, -np.inf)
        ln_d = _lse(b, axis=1)  # (n,)
        shift = np.where(finite, (mu - 1.0) * ls, -np.inf)
        ln_t = _lse(lnalpha + shift[:, None, :], axis=2)  # (n, Jmax)
        logp = v[idx, chosen] + ln_t[idx, chosen] - ln_d

        dv = np.zeros((n, jmax))
        dmu = np.zeros((n, mmax))
        if need_grad:
            cond_p = np.where(finite[:, None, :], np.exp(a - ls[:, None, :]), 0.0)
            nest_p = np.where(finite, np.exp(b - ln_d[:, None]), 0.0)
            a_chosen = lnalpha[idx, chosen, :] + shift
            post = np.where(finite, np.exp(a_chosen - ln_t[idx, chosen][:, None]), 0.0)
            coeff = post * (mu - 1.0) - nest_p * mu
            dv = np.einsum("njm,nm->nj", cond_p, coeff)
            dv[idx, chosen] += 1.0
            dmu = np.where(finite, ls * (post - nest_p), 0.0)
    return logp, dv, dmu
