"""Reproducible synthetic data generation and Monte Carlo drivers.

All randomness flows through the counter-based Philox generator keyed by
``(seed, stream, replicate)``, so parallel replicates use disjoint streams
with no coordination and every output is a pure function of its spec.
Gaussians come from numpy's ziggurat transform on those streams.
"""

import json
import math
import os
from dataclasses import dataclass, asdict

import numpy as np

from .core import Dataset, Truth, as_matrix, load_matrix_csv, save_matrix_csv
from .diagnostics import event_holds, event_lambda, event_probability_bound

# stream identifiers, combined with the replicate index into the Philox key
STREAM_DESIGN = 0
STREAM_COEF = 1
STREAM_NOISE = 2
STREAM_SEARCH = 3

_MASK64 = 2 ** 64 - 1

DESIGNS = ("toeplitz", "equicorrelated")


def rng_stream(seed, stream, replicate=0):
    """Philox generator on the disjoint stream ``(seed, stream, replicate)``."""
    key = np.array(
        [seed & _MASK64, ((stream & 0xFFFFFFFF) << 32) | (replicate & 0xFFFFFFFF)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SimulationSpec:
    """Shape, correlation, noise level and seed of one synthetic problem.

    ``rho_x`` is the Toeplitz correlation parameter (correlation rho^|i-j|
    between columns i and j) or, for the "equicorrelated" design, the exact
    common off-diagonal Gram entry.
    """

    n: int
    p: int
    q: int
    s: int
    rho_x: float
    snr: float
    seed: int
    normalization: str = "sqrt_n"
    design: str = "toeplitz"

    def __post_init__(self):
        if min(self.n, self.p, self.q) < 1:
            raise ValueError("n, p, q must be >= 1")
        if not 0 <= self.s <= self.p:
            raise ValueError(f"need 0 <= s <= p, got s={self.s}, p={self.p}")
        if not 0.0 <= self.rho_x < 1.0:
            raise ValueError(f"rho_x must lie in [0, 1), got {self.rho_x}")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        if self.normalization not in ("sqrt_n", "unit"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}, got {self.design!r}")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        return cls(**obj)


def _rescale_columns(X, normalization):
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ValueError("degenerate draw: a design column is exactly zero")
    target = math.sqrt(X.shape[0]) if normalization == "sqrt_n" else 1.0
    return X * (target / norms)


def make_design(spec, replicate=0):
    """Draw the n x p design matrix of *spec* and rescale its columns.

    Toeplitz: rows are i.i.d. centered Gaussians with covariance
    ``rho^|i-j|``, sampled through the covariance's Cholesky factor.
    Equicorrelated: a deterministic matrix whose Gram X^T X / n has unit
    diagonal and every off-diagonal entry exactly ``rho_x`` (requires
    p <= n), rotated by a seeded orthonormal basis.
    """
    rng = rng_stream(spec.seed, STREAM_DESIGN, replicate)
    n, p = spec.n, spec.p
    if spec.design == "toeplitz":
        if spec.rho_x == 0.0:
            X = rng.standard_normal((n, p))
        else:
            cov = spec.rho_x ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
            L = np.linalg.cholesky(cov)
            X = rng.standard_normal((n, p)) @ L.T
        return _rescale_columns(X, spec.normalization)
    # equicorrelated: X = sqrt(n) Q L^T with Psi = L L^T
    if p > n:
        raise ValueError(f"equicorrelated design needs p <= n, got p={p} > n={n}")
    psi = np.full((p, p), spec.rho_x)
    np.fill_diagonal(psi, 1.0)
    L = np.linalg.cholesky(psi)
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    X = math.sqrt(n) * Q @ L.T
    if spec.normalization == "unit":
        X = X / math.sqrt(n)
    return X


def make_coefficients(spec, replicate=0):
    """Draw the p x q coefficient matrix: s uniformly-chosen rows of i.i.d.
    standard Gaussians, the rest exactly zero."""
    rng = rng_stream(spec.seed, STREAM_COEF, replicate)
    B = np.zeros((spec.p, spec.q))
    if spec.s > 0:
        rows = rng.choice(spec.p, size=spec.s, replace=False)
        B[np.sort(rows)] = rng.standard_normal((spec.s, spec.q))
    return B


def make_noise(signal, snr, seed, replicate=0):
    """Gaussian noise scaled so the realized SNR is exactly *snr*.

    Returns ``(E, sigma_star)`` with ``E = sigma_star * G`` and
    ``sigma_star = ||signal||_F / (snr * ||G||_F)``.
    """
    S = as_matrix(signal, "signal")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    nrm = float(np.linalg.norm(S))
    if nrm == 0.0:
        raise ValueError("signal must be nonzero to set a noise level from SNR")
    rng = rng_stream(seed, STREAM_NOISE, replicate)
    G = rng.standard_normal(S.shape)
    sigma_star = nrm / (snr * float(np.linalg.norm(G)))
    return sigma_star * G, sigma_star


def simulate(spec, replicate=0):
    """Assemble a full dataset ``Y = X B* + E`` with truth attached."""
    X = make_design(spec, replicate)
    B = make_coefficients(spec, replicate)
    if spec.s == 0:
        raise ValueError("simulate needs s >= 1 (zero signal admits no SNR scaling)")
    E, sigma_star = make_noise(X @ B, spec.snr, spec.seed, replicate)
    Y = X @ B + E
    support = frozenset(int(j) for j in np.nonzero(np.linalg.norm(B, axis=1) > 0)[0])
    truth = Truth(B_star=B, sigma_star=sigma_star, support_star=support)
    return Dataset(X=X, Y=Y, truth=truth, normalization=spec.normalization)


def mc_event_frequency(event_id, spec, lam, A, trials, sigma_star=1.0):
    """Empirical frequency of a concentration event over fresh noise draws.

    Draws ``E = sigma_star * G`` *trials* times on disjoint replicate
    streams, with the design held fixed, and returns
    ``(empirical frequency, closed-form probability lower bound)``.
    Pass ``lam=None`` to use the event's own regularization level.
    """
    if trials < 1000:
        raise ValueError(f"trials must be >= 1000, got {trials}")
    X = make_design(spec)
    if lam is None:
        lam = event_lambda(event_id, spec.n, spec.q, spec.p, A, sigma_star)
    hits = 0
    for t in range(trials):
        G = rng_stream(spec.seed, STREAM_NOISE, t).standard_normal((spec.n, spec.q))
        if event_holds(event_id, X, sigma_star * G, lam, sigma_star):
            hits += 1
    bound = event_probability_bound(event_id, spec.n, spec.q, spec.p, A)
    return hits / trials, bound


# ---------------------------------------------------------------------------
# dataset directory dump/load (CSV matrices plus a JSON manifest)

def dump_dataset(data, directory, spec=None):
    """Write X.csv, Y.csv, optional B_star.csv and manifest.json."""
    os.makedirs(directory, exist_ok=True)
    save_matrix_csv(data.X, os.path.join(directory, "X.csv"))
    save_matrix_csv(data.Y, os.path.join(directory, "Y.csv"))
    manifest = {
        "n": data.n,
        "p": data.p,
        "q": data.q,
        "normalization": data.normalization,
    }
    if spec is not None:
        manifest["spec"] = spec.to_json()
    if data.truth is not None:
        save_matrix_csv(data.truth.B_star, os.path.join(directory, "B_star.csv"))
        manifest["sigma_star"] = data.truth.sigma_star
        manifest["support_star"] = sorted(data.truth.support_star)
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_dataset(directory):
    """Read a dataset directory written by :func:`dump_dataset`."""
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    X = load_matrix_csv(os.path.join(directory, "X.csv"))
    Y = load_matrix_csv(os.path.join(directory, "Y.csv"))
    truth = None
    b_path = os.path.join(directory, "B_star.csv")
    if os.path.exists(b_path):
        B = load_matrix_csv(b_path)
        truth = Truth(
            B_star=B,
            sigma_star=float(manifest["sigma_star"]),
            support_star=frozenset(int(j) for j in manifest["support_star"]),
        )
    return Dataset(X=X, Y=Y, truth=truth, normalization=manifest.get("normalization", "none"))
