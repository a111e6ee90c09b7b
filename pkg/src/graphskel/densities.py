"""Strata densities: isotropic point Gaussians and segment-convolved Gaussians.

The segment density is the convolution of uniform measure on a segment with an
isotropic Gaussian. It has a closed form built from a difference of error
functions; that difference is evaluated through the scaled complementary error
function whenever both arguments share a sign, because the naive difference
cancels to zero a few sigma away from the segment.

`edge_density_quadrature` integrates the defining formula directly and is kept
deliberately independent of the closed form so the two can cross-check.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, erfcx

__all__ = [
    "vertex_log_density",
    "edge_density_quadrature",
    "edge_log_density",
    "edge_log_density_grad",
    "edge_log_density_batch",
    "edge_log_density_grad_batch",
    "log_erf_diff",
]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _check_sigma(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    return sigma


def vertex_log_density(x, v, sigma: float):
    """Log of the isotropic Gaussian N(v, sigma^2 I) at x.

    x may be one point (n,) or a batch (m, n); returns a scalar or (m,).
    """
    sigma = float(_check_sigma(sigma))
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    n = v.shape[-1]
    with np.errstate(over="ignore"):  # astronomically distant points -> -inf
        sq = np.sum((x - v) ** 2, axis=-1)
        out = -0.5 * n * math.log(2 * math.pi * sigma * sigma) - sq / (2 * sigma * sigma)
    return float(out) if out.ndim == 0 else out


def edge_density_quadrature(x, v1, v2, sigma: float) -> float:
    """Segment-convolved Gaussian density by adaptive quadrature.

    Evaluates (2 pi sigma^2)^(-n/2) * int_0^1 exp(-|x - (t v1 + (1-t) v2)|^2
    / (2 sigma^2)) dt to ~1e-10 relative. The quadrature is hinted at the
    along-segment projection so narrow bumps (small sigma) are not missed.
    """
    sigma = float(_check_sigma(sigma))
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    w = v1 - v2
    ll = float(np.dot(w, w))
    if ll == 0.0:
        raise ValueError("degenerate segment: edge endpoints coincide")
    x = np.asarray(x, dtype=float)
    inv2s2 = 1.0 / (2 * sigma * sigma)

    def integrand(t: float) -> float:
        diff = x - (t * v1 + (1.0 - t) * v2)
        return math.exp(-float(np.dot(diff, diff)) * inv2s2)

    # peak of the integrand along the segment parameter; when the projection
    # falls outside [0, 1] the mass sits in a boundary layer at the near end
    t0 = float(np.dot(x - v2, w)) / ll
    anchor = min(1.0, max(0.0, t0))
    width = sigma / math.sqrt(ll)
    hints = sorted({anchor + k * width for k in (-8.0, -2.0, 0.0, 2.0, 8.0)})
    hints = [t for t in hints if 0.0 < t < 1.0]
    val, _ = quad(integrand, 0.0, 1.0, points=hints or None, epsabs=0.0, epsrel=1e-11, limit=200)
    n = x.shape[-1]
    return float((2 * math.pi * sigma * sigma) ** (-0.5 * n) * val)


def log_erf_diff(a, b):
    """log(erf(a) - erf(b)) for a >= b, stable for large same-sign arguments.

    Mixed-sign arguments have no cancellation and use erf directly; same-sign
    arguments route through erfcx. A difference that underflows to zero yields
    -inf rather than NaN.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.full(a.shape, -np.inf)

    with np.errstate(divide="ignore", invalid="ignore", under="ignore", over="ignore"):
        both_nonneg = b >= 0
        if np.any(both_nonneg):
            ab, bb = a[both_nonneg], b[both_nonneg]
            inner = erfcx(bb) - erfcx(ab) * np.exp(bb * bb - ab * ab)
            vals = np.where(inner > 0, np.log(np.maximum(inner, 1e-300)) - bb * bb, -np.inf)
            out[both_nonneg] = vals

        both_nonpos = a <= 0
        if np.any(both_nonpos):
            ap, bp = a[both_nonpos], b[both_nonpos]
            inner = erfcx(-ap) - erfcx(-bp) * np.exp(ap * ap - bp * bp)
            vals = np.where(inner > 0, np.log(np.maximum(inner, 1e-300)) - ap * ap, -np.inf)
            out[both_nonpos] = vals

        mixed = ~(both_nonneg | both_nonpos)
        if np.any(mixed):
            out[mixed] = np.log(erf(a[mixed]) - erf(b[mixed]))

    return out if out.ndim else float(out)


def _batch_setup(x, v1s, v2s, sigmas):
    """Broadcast K segments against m points; x -> (m, n), endpoints -> (K, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v1s = np.atleast_2d(np.asarray(v1s, dtype=float))
    v2s = np.atleast_2d(np.asarray(v2s, dtype=float))
    sigmas = np.atleast_1d(_check_sigma(sigmas))
    if sigmas.shape == (1,) and v1s.shape[0] > 1:
        sigmas = np.full(v1s.shape[0], sigmas[0])
    w = v1s - v2s  # (K, n)
    ll = np.einsum("kn,kn->k", w, w)
    if np.any(ll == 0.0):
        dead = np.flatnonzero(ll == 0.0).tolist()
        raise ValueError(f"degenerate segment: edge endpoints coincide (strata {dead})")
    return x, v1s, v2s, sigmas, w, ll


def _batch_terms(x, v1s, v2s, sigmas):
    x, v1s, v2s, sigmas, w, ll = _batch_setup(x, v1s, v2s, sigmas)
    length = np.sqrt(ll)
    s = (v1s + v2s)[:, None, :] - 2.0 * x[None, :, :]  # (K, m, n)
    g = np.einsum("kmn,kn->km", s, w)
    denom = (2.0 * math.sqrt(2.0) * length * sigmas)[:, None]  # (K, 1)
    t_plus = (g + ll[:, None]) / denom
    t_minus = (g - ll[:, None]) / denom
    ss = np.einsum("kmn,kmn->km", s, s)
    q = (g * g - ll[:, None] * ss) / (8.0 * ll * sigmas * sigmas)[:, None]
    n = x.shape[1]
    const = (
        -0.5 * (n + 1) * math.log(2.0)
        + 0.5 * (1 - n) * math.log(math.pi)
        + (1 - n) * np.log(sigmas)
        - np.log(length)
    )  # (K,)
    return x, sigmas, w, ll, s, g, denom, t_plus, t_minus, q, const


def edge_log_density_batch(x, v1s, v2s, sigmas) -> np.ndarray:
    """Closed-form log densities for K segments at m points, shape (m, K)."""
    _, _, _, _, _, _, _, t_plus, t_minus, q, const = _batch_terms(x, v1s, v2s, sigmas)
    out = log_erf_diff(t_plus, t_minus) + q + const[:, None]
    if np.any(np.isneginf(out)):
        warnings.warn(
            "edge_log_density underflowed to -inf for some points (erf difference below "
            "double precision); results are floored, not NaN",
            RuntimeWarning,
            stacklevel=2,
        )
    return out.T


def edge_log_density(x, v1, v2, sigma: float):
    """Closed-form log density of the segment-convolved Gaussian.

    Symmetric under endpoint swap. x may be (n,) or (m, n). Points whose erf
    difference underflows even on the stable path get -inf (with a warning),
    never NaN.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = edge_log_density_batch(x[None, :] if single else x, [v1], [v2], [sigma])[:, 0]
    return float(out[0]) if single else out


def edge_log_density_grad_batch(x, v1s, v2s, sigmas):
    """Log densities plus gradients w.r.t. both endpoints for K segments.

    Returns (logrho (K, m), d/dv1 (K, m, n), d/dv2 (K, m, n)). Underflowed
    points get zero gradients; their responsibilities vanish in the same
    regime.
    """
    x, sigmas, w, ll, s, g, denom, t_plus, t_minus, q, const = _batch_terms(x, v1s, v2s, sigmas)
    logdiff = log_erf_diff(t_plus, t_minus)
    logrho = logdiff + q + const[:, None]

    finite = np.isfinite(logdiff)
    with np.errstate(under="ignore"):
        r_plus = np.where(finite, _TWO_OVER_SQRT_PI * np.exp(-t_plus * t_plus - logdiff), 0.0)
        r_minus = np.where(finite, _TWO_OVER_SQRT_PI * np.exp(-t_minus * t_minus - logdiff), 0.0)

    sig2 = (sigmas * sigmas)[:, None, None]
    w_k = w[:, None, :]  # (K, 1, n)
    ll_k = ll[:, None, None]
    denom_k = denom[:, :, None]  # (K, 1, 1)
    s4 = s / (4.0 * sig2)
    g_over = (g / (4.0 * ll * sigmas * sigmas)[:, None])[:, :, None]  # (K, m, 1)
    g2_over = ((g * g) / (4.0 * ll * ll * sigmas * sigmas)[:, None])[:, :, None]

    dtp_1 = (s + 3.0 * w_k) / denom_k - t_plus[:, :, None] * w_k / ll_k
    dtm_1 = (s - w_k) / denom_k - t_minus[:, :, None] * w_k / ll_k
    dtp_2 = (-s - w_k) / denom_k + t_plus[:, :, None] * w_k / ll_k
    dtm_2 = (3.0 * w_k - s) / denom_k + t_minus[:, :, None] * w_k / ll_k

    dq_1 = g_over * (w_k + s) - g2_over * w_k - s4
    dq_2 = g_over * (w_k - s) + g2_over * w_k - s4

    rp = r_plus[:, :, None]
    rm = r_minus[:, :, None]
    grad1 = rp * dtp_1 - rm * dtm_1 + dq_1 - w_k / ll_k
    grad2 = rp * dtp_2 - rm * dtm_2 + dq_2 + w_k / ll_k
    keep = finite[:, :, None]
    return logrho, np.where(keep, grad1, 0.0), np.where(keep, grad2, 0.0)


def edge_log_density_grad(x, v1, v2, sigma: float):
    """Single-segment version of edge_log_density_grad_batch, shapes (m,), (m, n)."""
    logrho, g1, g2 = edge_log_density_grad_batch(np.atleast_2d(x), [v1], [v2], [sigma])
    return logrho[0], g1[0], g2[0]
