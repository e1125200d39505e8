"""Closed-form smoothings of the Frobenius and nuclear norms.

Both arise from the variational identity

    min_{sigma >= sigma_min}  ||Z||_F^2 / (2 sigma) + sigma / 2,

whose unconstrained minimizer is sigma = ||Z||_F.  The matrix analogue
replaces the scalar scale by an SPD matrix S with spectrum confined to
[sigma_min, sigma_max]; its minimizer clips the singular values of the
(1/sqrt(q)-scaled) residual matrix.  Brute-force minimization oracles are
provided so the closed forms are never trusted on their own.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import NumericError, as_matrix

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SmoothingParams:
    """Spectrum bounds for the noise-scale variable; sigma_max may be inf."""

    sigma_min: float
    sigma_max: float = math.inf

    def __post_init__(self):
        if not self.sigma_min > 0:
            raise ValueError(f"sigma_min must be positive, got {self.sigma_min}")
        if not self.sigma_min <= self.sigma_max:
            raise ValueError(
                f"need sigma_min <= sigma_max, got {self.sigma_min} > {self.sigma_max}"
            )


def smoothed_frobenius(Z, sigma_min):
    """Huber-type smoothing of ``||Z||_F`` at scale *sigma_min*.

    Equals ``||Z||_F`` when ``||Z||_F >= sigma_min`` and the quadratic
    ``||Z||_F^2/(2 sigma_min) + sigma_min/2`` below that.
    """
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min}")
    nrm = np.linalg.norm(as_matrix(Z))
    if nrm >= sigma_min:
        return float(nrm)
    return float(nrm * nrm / (2.0 * sigma_min) + sigma_min / 2.0)


def optimal_sigma(Z, sigma_min):
    """Minimizer of ``sigma -> ||Z||_F^2/(2 sigma) + sigma/2`` over
    ``[sigma_min, inf)``, namely ``max(sigma_min, ||Z||_F)``."""
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min}")
    return float(max(sigma_min, np.linalg.norm(as_matrix(Z))))


def _scaled_spectrum(R, q_scale):
    """Full left basis U (n x n) and length-n singular values of R/sqrt(q)."""
    A = as_matrix(R)
    n, q = A.shape
    Z = A / math.sqrt(q) if q_scale else A
    try:
        U, gamma, _ = np.linalg.svd(Z, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed on a {n}x{q} matrix: {exc}") from exc
    full = np.zeros(n)
    full[: gamma.size] = gamma
    return U, full


def optimal_covariance_root(R, params, q_scale=True):
    """Optimal noise-covariance root for residuals *R* (n x q).

    Returns ``U diag(clip(gamma_i, sigma_min, sigma_max)) U^T`` where
    ``U diag(gamma) V^T`` is the SVD of ``R/sqrt(q)``; all eigenvalues of the
    result lie in ``[sigma_min, sigma_max]`` exactly.
    """
    if not math.isfinite(params.sigma_max):
        raise ValueError("optimal_covariance_root needs a finite sigma_max")
    U, gamma = _scaled_spectrum(R, q_scale)
    clipped = np.clip(gamma, params.sigma_min, params.sigma_max)
    S = (U * clipped) @ U.T
    return 0.5 * (S + S.T)  # exact symmetry


def smoothed_nuclear(R, params):
    """Smoothed nuclear datafit of residuals *R* (n x q).

    Value of ``min_S ||R||^2_{S^{-1}}/(2nq) + tr(S)/(2n)`` over SPD S with
    spectrum in ``[sigma_min, sigma_max]``; equals ``(1/n) sum_i h(gamma_i)``
    with ``h(g) = g^2/(2c) + c/2``, ``c = clip(g, sigma_min, sigma_max)`` and
    gamma the singular values of ``R/sqrt(q)`` padded with zeros to length n.
    """
    _, gamma = _scaled_spectrum(R, q_scale=True)
    c = np.clip(gamma, params.sigma_min, params.sigma_max)
    return float(np.sum(gamma * gamma / (2.0 * c) + c / 2.0) / gamma.size)


def covariance_objective(R, S):
    """Unsmoothed matrix-concomitant datafit ``||R||^2_{S^{-1}}/(2nq) + tr(S)/(2n)``."""
    A = as_matrix(R)
    n, q = A.shape
    quad = float(np.trace(A.T @ np.linalg.solve(S, A)))
    return quad / (2.0 * n * q) + float(np.trace(S)) / (2.0 * n)


# ---------------------------------------------------------------------------
# independent minimization oracles

def smoothed_frobenius_oracle(Z, sigma_min):
    """Golden-section search for ``min_{sigma >= sigma_min}`` of the
    concomitant scalar objective; certifies :func:`smoothed_frobenius`."""
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min}")
    nrm = np.linalg.norm(as_matrix(Z))
    sq = nrm * nrm

    def f(sigma):
        return sq / (2.0 * sigma) + sigma / 2.0

    lo = sigma_min
    hi = sigma_min + 10.0 * (1.0 + nrm)
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-12:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best = 0.5 * (a + b)
    return float(min(f(best), f(lo)))


def _project_spectrum(S, sigma_min, sigma_max):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w = np.clip(w, sigma_min, sigma_max)
    return (V * w) @ V.T


def smoothed_nuclear_oracle(R, params, n_starts=20, iters=300, seed=0):
    """Projected gradient descent over the spectrally-clipped SPD set.

    Runs from *n_starts* random SPD starts (plus two deterministic ones)
    with backtracking line search, and returns the best objective value
    found; certifies :func:`smoothed_nuclear` on small instances.
    """
    A = as_matrix(R)
    n, q = A.shape
    if not math.isfinite(params.sigma_max):
        raise ValueError("smoothed_nuclear_oracle needs a finite sigma_max")
    smin, smax = params.sigma_min, params.sigma_max
    rng = np.random.Generator(np.random.Philox(key=seed))
    G = A @ A.T / q  # gradient of the quadratic term is -(1/2n) S^-1 G S^-1
    eye = np.eye(n)

    def decompose(M):
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        w = np.clip(w, smin, smax)
        T = V.T @ A
        value = (float(np.sum(T * T / w[:, None])) / (2.0 * n * q)
                 + float(w.sum()) / (2.0 * n))
        return w, V, value

    starts = [eye * min(max(smin, 1.0), smax), eye * (0.5 * (smin + smax))]
    while len(starts) < n_starts + 2:
        W = rng.standard_normal((n, n))
        starts.append(W @ W.T)

    best = math.inf
    for S0 in starts:
        w, V, v = decompose(S0)
        S = (V * w) @ V.T
        step = max(smin * smin, 1e-12)  # conservative vs the 1/smin^3-scale curvature
        for _ in range(iters):
            Sinv = (V / w) @ V.T
            grad = -Sinv @ G @ Sinv / (2.0 * n) + eye / (2.0 * n)
            w2, V2, v2 = decompose(S - step * grad)
            while v2 > v + 1e-15 and step > 1e-18:
                step *= 0.5
                w2, V2, v2 = decompose(S - step * grad)
            stalled = abs(v - v2) <= 1e-14 * (1.0 + abs(v))
            w, V, v = w2, V2, min(v, v2)
            S = (V * w) @ V.T
            if stalled:
                break
            step *= 1.3
        best = min(best, v)
    return float(best)
