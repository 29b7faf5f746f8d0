"""Elementary symmetric polynomials, Garding cones, and the curvature product f.

For a vector kappa in R^n, define the complementary sums

    lambda_i = sum_{j != i} kappa_j = sigma_1(kappa) - kappa_i

and the curvature function

    f(kappa) = lambda_1 * lambda_2 * ... * lambda_n.

f is the quantity prescribed by the solver: for a graph with principal
curvatures kappa it equals det(g^{-1} eta) where eta = H g - h.  Its natural
domain is the open convex cone

    Gamma = { kappa : lambda_i > 0 for every i },

on which f > 0, all partial derivatives f_i are positive, f^{1/n} is concave,
and f vanishes on the boundary.  Gamma sits between the Garding cones:
Gamma_2 contains Gamma contains Gamma_n (the positive orthant).

All functions accept plain sequences or numpy arrays; batched inputs stack
vectors along leading axes.
"""

from __future__ import annotations

import math

import numpy as np

from ._cone_constants import DELTA0_OBSERVED_MIN_SHARE, INTERP_C0


class NotAdmissible(ValueError):
    """A curvature vector (or grid state) lies outside the admissible cone."""

    def __init__(self, msg, margin=None, node=None):
        super().__init__(msg)
        self.margin = margin
        self.node = node


def as_kappa(values):
    """Validate and return a curvature vector as a float array.

    Accepts any 1-D sequence with at least two finite entries.
    """
    kappa = np.asarray(values, dtype=float)
    if kappa.ndim != 1:
        raise ValueError(f"curvature vector must be 1-D, got shape {kappa.shape}")
    if kappa.shape[0] < 2:
        raise ValueError("curvature vector needs at least 2 entries")
    if not np.all(np.isfinite(kappa)):
        raise ValueError("curvature vector has non-finite entries")
    return kappa


def sigma_all(kappa):
    """All elementary symmetric polynomials sigma_0..sigma_n of kappa.

    Expanding-product recurrence: multiplies out prod_i (1 + kappa_i t) one
    factor at a time, so integer inputs give exact integer outputs up to
    float rounding.  Batched over leading axes; returns shape (..., n+1).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    e = np.zeros(kappa.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        e[..., 1 : i + 2] = e[..., 1 : i + 2] + kappa[..., i : i + 1] * e[..., 0 : i + 1]
    return e


def sigma(kappa, k):
    """sigma_k(kappa); k = 0 gives 1, k = n the full product."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in 0..{n}, got {k}")
    out = sigma_all(kappa)[..., k]
    return float(out) if out.ndim == 0 else out


def sigma_reduced(kappa, k, i):
    """sigma_k of kappa with entry i deleted (0-based index)."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not 0 <= i < n:
        raise ValueError(f"entry index must lie in 0..{n - 1}, got {i}")
    if not 0 <= k <= n - 1:
        raise ValueError(f"k must lie in 0..{n - 1}, got {k}")
    return sigma(np.delete(kappa, i, axis=-1), k)


def in_gamma_k(kappa, k):
    """Membership in the Garding cone Gamma_k: sigma_1..sigma_k all positive."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    s = sigma_all(kappa)
    ok = np.all(s[..., 1 : k + 1] > 0.0, axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


def lambda_of(kappa):
    """Complementary sums lambda_i = sigma_1(kappa) - kappa_i."""
    kappa = np.asarray(kappa, dtype=float)
    return kappa.sum(axis=-1, keepdims=True) - kappa


def cone_margin(kappa):
    """min_i lambda_i; positive exactly on the admissible cone Gamma."""
    m = lambda_of(kappa).min(axis=-1)
    return float(m) if np.ndim(m) == 0 else m


def in_gamma(kappa):
    m = cone_margin(kappa)
    return m > 0.0 if np.ndim(m) == 0 else m > 0.0


def complementary_products(lam):
    """P_m = prod_{l != m} lam_l via prefix/suffix products (no division).

    Stable at zero entries of lam; batched over leading axes.
    """
    lam = np.asarray(lam, dtype=float)
    pref = np.ones_like(lam)
    suff = np.ones_like(lam)
    pref[..., 1:] = np.cumprod(lam[..., :-1], axis=-1)
    suff[..., :-1] = np.cumprod(lam[..., :0:-1], axis=-1)[..., ::-1]
    return pref * suff


def f_value(kappa, strict=True, tol=0.0):
    """f(kappa) = prod_i lambda_i.

    With strict=True (solver contexts) raises NotAdmissible when any
    lambda_i < -tol; strict=False evaluates the product regardless, which is
    what oracles and tests want.
    """
    lam = lambda_of(kappa)
    if strict:
        m = lam.min()
        if m < -tol:
            raise NotAdmissible(
                f"curvature vector outside closure of the cone (margin {m:.3e})",
                margin=float(m),
            )
    out = np.prod(lam, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def f_grad(kappa, strict=True):
    """Partial derivatives f_i = d f / d kappa_i = sum_m P_m - P_i.

    Positive on the open cone.  strict=True demands kappa strictly inside
    Gamma; strict=False evaluates the same algebra anywhere.
    """
    lam = lambda_of(kappa)
    if strict and lam.min() <= 0.0:
        raise NotAdmissible(
            f"gradient of f requested outside the open cone (margin {lam.min():.3e})",
            margin=float(lam.min()),
        )
    P = complementary_products(lam)
    return P.sum(axis=-1, keepdims=True) - P


def f_normalized(kappa, strict=True, tol=0.0):
    """f^{1/n}, clamped to 0 on the cone boundary (degree-1 homogeneous)."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    val = f_value(kappa, strict=strict, tol=tol)
    return np.maximum(val, 0.0) ** (1.0 / n)


def maclaurin_c0(n, k):
    """Constant in sigma_1 >= c0 sigma_k^{1/k} on Gamma_k: n / binom(n,k)^{1/k}."""
    return n * math.comb(n, k) ** (-1.0 / k)


def interp_c0(n, k):
    """Table constant for sigma_{k-1} >= c0 sigma_k^{1-1/(k-1)} sigma_1^{1/(k-1)}.

    Values come from the brute-force scan in tools/gen_cone_constants.py
    (observed minimum over cone samples with a 1% safety factor).
    """
    try:
        return INTERP_C0[(n, k)]
    except KeyError:
        raise ValueError(f"no tabulated constant for (n, k) = ({n}, {k})") from None


def delta0(n):
    """Share constant: kappa_j < 0 inside Gamma forces f_j >= delta0 * sum_i f_i."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 1.0 / (n * (n - 1))


def sample_gamma(rng, size, n, lam_range=(0.05, 3.0)):
    """Draw kappa vectors exactly in Gamma by sampling lambda > 0 and inverting.

    kappa_i = sigma_1(lambda)/(n-1) - lambda_i maps any positive lambda back
    to a cone point.
    """
    lam = rng.uniform(lam_range[0], lam_range[1], size=(size, n))
    return lam.sum(axis=-1, keepdims=True) / (n - 1) - lam


def sample_gamma_k(rng, size, n, k, box=(-1.0, 3.0), max_tries=200):
    """Rejection-sample kappa in the Garding cone Gamma_k from a box."""
    out = np.empty((0, n))
    for _ in range(max_tries):
        cand = rng.uniform(box[0], box[1], size=(4 * size, n))
        s = sigma_all(cand)
        keep = np.all(s[:, 1 : k + 1] > 0.0, axis=-1)
        out = np.concatenate([out, cand[keep]])
        if out.shape[0] >= size:
            return out[:size]
    raise RuntimeError(f"rejection sampling for Gamma_{k} in R^{n} stalled")
