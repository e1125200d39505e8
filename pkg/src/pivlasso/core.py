"""Dense matrix primitives shared by every other module.

Matrices are plain float64 numpy arrays, always 2-d, always finite.  The
row-wise mixed norms used throughout are

    l21(M)   = sum_j ||M[j, :]||_2        (sum of row norms)
    l2inf(M) = max_j ||M[j, :]||_2        (max row norm)

together with the nuclear norm (sum of singular values) and the block
soft-thresholding operator, the proximal map of ``t * ||.||_2``.
"""

from dataclasses import dataclass

import numpy as np

SVD_MAX_SIDE = 256  # desk-scale contract for the svd() entry point


class NumericError(RuntimeError):
    """A numerical routine failed (e.g. SVD did not converge)."""


def as_matrix(M, name="matrix"):
    """Validate and return *M* as a 2-d finite float64 array.

    Raises ValueError for empty shapes or non-finite entries.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_vector(v, name="vector"):
    """Validate and return *v* as a 1-d finite float64 array."""
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def norm_l21(M):
    """Sum of the Euclidean norms of the rows of *M*."""
    A = as_matrix(M)
    return float(np.linalg.norm(A, axis=1).sum())


def norm_l2inf(M):
    """Maximum Euclidean norm over the rows of *M*."""
    A = as_matrix(M)
    return float(np.linalg.norm(A, axis=1).max())


def norm_nuclear(M):
    """Nuclear norm of *M* (sum of its singular values)."""
    A = as_matrix(M)
    try:
        s = np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed on a {A.shape[0]}x{A.shape[1]} matrix: {exc}") from exc
    return float(s.sum())


def block_soft_threshold(v, t):
    """Proximal operator of ``t * ||.||_2``: shrink the norm of *v* by *t*.

    Returns ``(1 - t/||v||)_+ * v`` and the zero vector when ``v = 0``.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    a = as_vector(v)
    nrm = np.linalg.norm(a)
    if nrm <= t:
        return np.zeros_like(a)
    return (1.0 - t / nrm) * a


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``M = U @ diag(singular_values) @ V.T`` with a fixed sign
    convention: the first nonzero entry of each column of U is nonnegative."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.singular_values) @ self.V.T


def _fix_svd_signs(U, V):
    # first nonzero entry of each left singular vector made nonnegative
    for k in range(U.shape[1]):
        col = U[:, k]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            U[:, k] = -col
            V[:, k] = -V[:, k]
    return U, V


def svd(M):
    """Deterministic thin SVD of *M* as :class:`SvdFactors`.

    Sides are limited to SVD_MAX_SIDE; singular values are returned as
    computed, never thresholded to zero.
    """
    A = as_matrix(M)
    if min(A.shape) > SVD_MAX_SIDE:
        raise ValueError(
            f"svd supports min(rows, cols) <= {SVD_MAX_SIDE}, got shape {A.shape}"
        )
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed on a {A.shape[0]}x{A.shape[1]} matrix: {exc}") from exc
    U, V = _fix_svd_signs(U, Vh.T)
    return SvdFactors(U=U, singular_values=s, V=V)


@dataclass(frozen=True)
class Truth:
    """Ground truth attached to a simulated dataset."""

    B_star: np.ndarray       # p x q
    sigma_star: float        # > 0
    support_star: frozenset  # indices of nonzero rows of B_star


# column scaling conventions for the design matrix
NORMALIZATIONS = ("sqrt_n", "unit", "none")


@dataclass(frozen=True)
class Dataset:
    """Design/response pair, optionally with simulation ground truth.

    ``normalization`` records the column scaling of X: "sqrt_n" means
    ``||X[:, j]|| = sqrt(n)`` (so the Gram diagonal is 1), "unit" means
    unit column norms, "none" makes no claim.
    """

    X: np.ndarray
    Y: np.ndarray
    truth: Truth | None = None
    normalization: str = "none"

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        n = X.shape[0]
        norms = np.linalg.norm(X, axis=0)
        if self.normalization == "sqrt_n":
            bad = np.nonzero(np.abs(norms - np.sqrt(n)) > 1e-10 * np.sqrt(n))[0]
            if bad.size:
                raise ValueError(f"column {bad[0]} of X has norm {norms[bad[0]]}, expected sqrt(n)")
        elif self.normalization == "unit":
            bad = np.nonzero(np.abs(norms - 1.0) > 1e-10)[0]
            if bad.size:
                raise ValueError(f"column {bad[0]} of X has norm {norms[bad[0]]}, expected 1")
        if self.truth is not None:
            B = as_matrix(self.truth.B_star, "B_star")
            if B.shape != (X.shape[1], Y.shape[1]):
                raise ValueError(
                    f"B_star has shape {B.shape}, expected {(X.shape[1], Y.shape[1])}"
                )
            if self.truth.sigma_star <= 0:
                raise ValueError("sigma_star must be positive")
            actual = frozenset(int(j) for j in np.nonzero(np.linalg.norm(B, axis=1) > 0)[0])
            if frozenset(self.truth.support_star) != actual:
                raise ValueError("support_star does not match the nonzero rows of B_star")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]


# ---------------------------------------------------------------------------
# serialization: CSV (no header, '.' decimal) and a JSON envelope

def save_matrix_csv(M, path):
    """Write *M* as comma-separated rows, one matrix row per line."""
    A = as_matrix(M)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in A:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_matrix_csv(path):
    """Read a matrix written by :func:`save_matrix_csv`."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"{path} holds no matrix rows")
    return as_matrix(np.array(rows), name=str(path))


def matrix_to_json(M):
    """JSON envelope ``{rows, cols, data}`` with row-major data."""
    A = as_matrix(M)
    return {"rows": A.shape[0], "cols": A.shape[1], "data": [float(x) for x in A.ravel()]}


def matrix_from_json(obj):
    """Inverse of :func:`matrix_to_json`."""
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=np.float64)
    if data.size != rows * cols:
        raise ValueError(f"envelope claims {rows}x{cols} but carries {data.size} entries")
    return as_matrix(data.reshape(rows, cols))
