"""Solvers for the pivotal sparse-regression family.

Four estimators share one computational skeleton (cyclic block coordinate
descent with exact proximal steps and incremental residual updates):

    lasso     min  ||y - X b||^2 / (2n) + lam ||b||_1
    mt_lasso  min  ||Y - X B||_F^2 / (2nq) + lam ||B||_{2,1}
    scl       min  ||Y - X B||_F^2 / (2nq sigma) + sigma/2 + lam ||B||_{2,1}
                   over sigma >= sigma_min   (smoothed concomitant Lasso)
    sgcl      min  ||Y - X B||^2_{S^{-1}} / (2nq) + tr(S)/(2n) + lam ||B||_{2,1}
                   over sigma_max I >= S >= sigma_min I

The noise variables have closed-form updates: sigma is the clipped residual
RMS (refreshed every sweep), S is the clipped-spectrum covariance root of
the residuals (refreshed every ``s_update_every`` sweeps).  Sweeps run in
compiled bursts that record the objective after every epoch; between bursts
the stationarity residual is measured in units of the effective penalty
level, so convergence doubles as a KKT certificate.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import as_matrix
from .smoothing import SmoothingParams, optimal_covariance_root, smoothed_nuclear

KINDS = ("lasso", "mt_lasso", "scl", "sgcl")

_CHECK_EVERY = 10  # epochs per compiled burst between KKT checks


@dataclass(frozen=True)
class EstimatorSpec:
    """Estimator kind, hyperparameters and solver controls."""

    kind: str
    lam: float
    sigma_min: float | None = None
    sigma_max: float | None = None
    tol: float = 1e-8
    max_epochs: int = 50_000
    s_update_every: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.s_update_every < 1:
            raise ValueError(f"s_update_every must be >= 1, got {self.s_update_every}")
        if self.kind in ("scl", "sgcl"):
            if self.sigma_min is None or not self.sigma_min > 0:
                raise ValueError(f"sigma_min must be positive for {self.kind}")
        if self.kind == "sgcl":
            if self.sigma_max is None or not math.isfinite(self.sigma_max):
                raise ValueError("sigma_max must be finite for sgcl")
            if self.sigma_max < self.sigma_min:
                raise ValueError(
                    f"need sigma_min <= sigma_max, got {self.sigma_min} > {self.sigma_max}"
                )


@dataclass(frozen=True)
class FitResult:
    """Solution of one fit, with its convergence certificate.

    ``kkt_violation`` is the maximum stationarity residual divided by the
    effective penalty level, so ``converged`` means the estimator's Dantzig
    inequality holds with relative margin ``tol``.
    """

    B_hat: np.ndarray
    residuals: np.ndarray
    objective: float
    epochs_run: int
    kkt_violation: float
    converged: bool
    sigma_hat: float | None = None
    S_hat: np.ndarray | None = None
    objective_history: np.ndarray | None = None


# ---------------------------------------------------------------------------
# compiled sweeps (XT is the p x n transposed design, C-ordered)

@njit(cache=True)
def _sweep_scalar(XT, col_sq, beta, r, thresh):
    # one cyclic pass of soft-thresholded updates; r = y - X beta maintained
    p, n = XT.shape
    for j in range(p):
        cj = col_sq[j]
        rho = cj * beta[j]
        for i in range(n):
            rho += XT[j, i] * r[i]
        if rho > thresh:
            new = (rho - thresh) / cj
        elif rho < -thresh:
            new = (rho + thresh) / cj
        else:
            new = 0.0
        d = beta[j] - new
        if d != 0.0:
            beta[j] = new
            for i in range(n):
                r[i] += XT[j, i] * d


@njit(cache=True)
def _sweep_block(XT, WT, a, B, R, thresh, g):
    # one cyclic pass of block soft-thresholded updates.  WT is the
    # (preconditioned) correlation design: the multitask Lasso passes
    # WT = XT, the generalized solver passes WT = (S^{-1} X)^T;
    # a[j] = <X_j, W_j>; R = Y - X B maintained; g is a length-q scratch.
    p, n = XT.shape
    q = B.shape[1]
    for j in range(p):
        aj = a[j]
        for t in range(q):
            g[t] = aj * B[j, t]
        for i in range(n):
            wi = WT[j, i]
            if wi != 0.0:
                for t in range(q):
                    g[t] += wi * R[i, t]
        gn = 0.0
        for t in range(q):
            gn += g[t] * g[t]
        gn = np.sqrt(gn)
        scale = 0.0 if gn <= thresh else (1.0 - thresh / gn) / aj
        changed = False
        for t in range(q):
            new = scale * g[t]
            d = B[j, t] - new
            if d != 0.0:
                changed = True
            g[t] = d
            B[j, t] = new
        if changed:
            for i in range(n):
                xi = XT[j, i]
                if xi != 0.0:
                    for t in range(q):
                        R[i, t] += xi * g[t]


@njit(cache=True)
def _l21(B):
    p, q = B.shape
    total = 0.0
    for j in range(p):
        s = 0.0
        for t in range(q):
            s += B[j, t] * B[j, t]
        total += np.sqrt(s)
    return total


@njit(cache=True)
def _sumsq(R):
    total = 0.0
    for x in R.flat:
        total += x * x
    return total


@njit(cache=True)
def _lasso_burst(XT, col_sq, beta, r, lam, epochs, obj_out):
    n = XT.shape[1]
    thresh = n * lam
    for e in range(epochs):
        _sweep_scalar(XT, col_sq, beta, r, thresh)
        pen = 0.0
        for j in range(beta.shape[0]):
            pen += abs(beta[j])
        obj_out[e] = _sumsq(r) / (2.0 * n) + lam * pen


@njit(cache=True)
def _mt_burst(XT, col_sq, B, R, lam_eff, epochs, obj_out):
    n = XT.shape[1]
    q = B.shape[1]
    g = np.empty(q)
    thresh = n * q * lam_eff
    for e in range(epochs):
        _sweep_block(XT, XT, col_sq, B, R, thresh, g)
        obj_out[e] = _sumsq(R) / (2.0 * n * q) + lam_eff * _l21(B)


@njit(cache=True)
def _scl_burst(XT, col_sq, B, R, lam, sigma_min, sigma_in, epochs, obj_out):
    # alternates one B sweep at fixed sigma with the closed-form sigma update
    n = XT.shape[1]
    q = B.shape[1]
    g = np.empty(q)
    sigma = sigma_in
    for e in range(epochs):
        _sweep_block(XT, XT, col_sq, B, R, n * q * sigma * lam, g)
        rms = np.sqrt(_sumsq(R) / (n * q))
        sigma = rms if rms > sigma_min else sigma_min
        obj_out[e] = (_sumsq(R) / (2.0 * n * q * sigma) + sigma / 2.0 + lam * _l21(B))
    return sigma


@njit(cache=True)
def _sgcl_burst(XT, WT, a, B, R, Sinv, trS, lam, epochs, obj_out):
    # S (hence WT, a, Sinv) is held fixed for the whole burst
    n = XT.shape[1]
    q = B.shape[1]
    g = np.empty(q)
    thresh = n * q * lam
    for e in range(epochs):
        _sweep_block(XT, WT, a, B, R, thresh, g)
        quad = 0.0
        SR = np.dot(Sinv, R)
        for i in range(n):
            for t in range(q):
                quad += R[i, t] * SR[i, t]
        obj_out[e] = quad / (2.0 * n * q) + trS / (2.0 * n) + lam * _l21(B)


def _stationarity_violation(G, B, lam_eff):
    """Max over features of the KKT residual of ``datafit + lam_eff ||.||_{2,1}``,
    in units of lam_eff.  G is the (negative) datafit gradient, p x q."""
    gn = np.linalg.norm(G, axis=1)
    viol = np.maximum(gn - lam_eff, 0.0)
    bn = np.linalg.norm(B, axis=1)
    active = bn > 0
    if np.any(active):
        D = G[active] - lam_eff * (B[active] / bn[active, None])
        viol[active] = np.linalg.norm(D, axis=1)
    return float(viol.max() / lam_eff)


def _prepare(data, q_expected=None):
    X, Y = data.X, data.Y
    if q_expected is not None and Y.shape[1] != q_expected:
        raise ValueError(f"expected q = {q_expected}, got q = {Y.shape[1]}")
    XT = np.ascontiguousarray(X.T)
    col_sq = np.einsum("ji,ji->j", XT, XT)
    return X, Y, XT, col_sq


def _warm_B(b_init, p, q):
    if b_init is None:
        return np.zeros((p, q))
    B = np.array(as_matrix(b_init, "b_init"), dtype=np.float64, copy=True)
    if B.shape != (p, q):
        raise ValueError(f"b_init has shape {B.shape}, expected {(p, q)}")
    return B


def fit_lasso(data, lam, tol=1e-8, max_epochs=50_000, b_init=None):
    """Single-task Lasso by cyclic coordinate descent.

    Runs until the stationarity residual falls below ``tol * lam`` or
    ``max_epochs`` sweeps elapse (then ``converged`` is False).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    X, Y, XT, col_sq = _prepare(data, q_expected=1)
    n, p = X.shape
    beta = _warm_B(b_init, p, 1)[:, 0].copy()
    r = Y[:, 0] - X @ beta
    history = []
    converged = False
    epochs = 0
    buf = np.empty(_CHECK_EVERY)
    while epochs < max_epochs:
        burst = min(_CHECK_EVERY, max_epochs - epochs)
        _lasso_burst(XT, col_sq, beta, r, lam, burst, buf)
        history.extend(buf[:burst])
        epochs += burst
        kkt = _stationarity_violation((XT @ r)[:, None] / n, beta[:, None], lam)
        if kkt <= tol:
            converged = True
            break
    B = beta[:, None]
    R = Y - X @ B
    kkt = _stationarity_violation(X.T @ R / n, B, lam)
    obj = float(np.sum(R * R)) / (2 * n) + lam * float(np.abs(beta).sum())
    return FitResult(
        B_hat=B, residuals=R, objective=obj, epochs_run=epochs,
        kkt_violation=kkt, converged=converged,
        objective_history=np.array(history),
    )


def fit_mt_lasso(data, lam_eff, tol=1e-8, max_epochs=50_000, b_init=None):
    """Multitask (group) Lasso by block coordinate descent.

    ``lam_eff`` is the coefficient of the row-wise l21 penalty; in the
    saturated concomitant regime it plays the role of ``lam * sigma_min``.
    """
    if not lam_eff > 0:
        raise ValueError(f"lambda must be positive, got {lam_eff}")
    X, Y, XT, col_sq = _prepare(data)
    n, p = X.shape
    q = Y.shape[1]
    B = _warm_B(b_init, p, q)
    R = Y - X @ B
    history = []
    converged = False
    epochs = 0
    buf = np.empty(_CHECK_EVERY)
    while epochs < max_epochs:
        burst = min(_CHECK_EVERY, max_epochs - epochs)
        _mt_burst(XT, col_sq, B, R, lam_eff, burst, buf)
        history.extend(buf[:burst])
        epochs += burst
        kkt = _stationarity_violation(X.T @ R / (n * q), B, lam_eff)
        if kkt <= tol:
            converged = True
            break
    R = Y - X @ B
    kkt = _stationarity_violation(X.T @ R / (n * q), B, lam_eff)
    obj = float(np.sum(R * R)) / (2 * n * q) + lam_eff * float(np.linalg.norm(B, axis=1).sum())
    return FitResult(
        B_hat=B, residuals=R, objective=obj, epochs_run=epochs,
        kkt_violation=kkt, converged=converged,
        objective_history=np.array(history),
    )


def _sigma_update(R, n, q, sigma_min):
    return max(sigma_min, float(np.linalg.norm(R)) / math.sqrt(n * q))


def fit_scl(data, lam, sigma_min, tol=1e-8, max_epochs=50_000, b_init=None):
    """Smoothed (multitask) concomitant Lasso.

    Alternates one block-coordinate sweep over B at fixed sigma with the
    closed-form update ``sigma = max(sigma_min, ||R||_F / sqrt(nq))``; the
    KKT certificate is measured at the refreshed sigma.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min}")
    X, Y, XT, col_sq = _prepare(data)
    n, p = X.shape
    q = Y.shape[1]
    B = _warm_B(b_init, p, q)
    R = Y - X @ B
    sigma = _sigma_update(R, n, q, sigma_min)
    history = []
    converged = False
    epochs = 0
    buf = np.empty(_CHECK_EVERY)
    while epochs < max_epochs:
        burst = min(_CHECK_EVERY, max_epochs - epochs)
        sigma = float(_scl_burst(XT, col_sq, B, R, lam, sigma_min, sigma, burst, buf))
        history.extend(buf[:burst])
        epochs += burst
        kkt = _stationarity_violation(X.T @ R / (n * q), B, lam * sigma)
        if kkt <= tol:
            converged = True
            break
    R = Y - X @ B
    sigma = _sigma_update(R, n, q, sigma_min)
    kkt = _stationarity_violation(X.T @ R / (n * q), B, lam * sigma)
    obj = float(np.sum(R * R)) / (2 * n * q * sigma) + sigma / 2 \
        + lam * float(np.linalg.norm(B, axis=1).sum())
    return FitResult(
        B_hat=B, residuals=R, objective=obj, epochs_run=epochs,
        kkt_violation=kkt, converged=converged, sigma_hat=sigma,
        objective_history=np.array(history),
    )


def _sgcl_precompute(X, S):
    w, V = np.linalg.eigh(S)
    Sinv = (V / w) @ V.T
    Sinv = 0.5 * (Sinv + Sinv.T)
    W = Sinv @ X
    a = np.einsum("ij,ij->j", X, W)
    return Sinv, np.ascontiguousarray(W.T), a


def fit_sgcl(data, lam, sigma_min, sigma_max, tol=1e-8, max_epochs=50_000,
             s_update_every=10, b_init=None):
    """Smoothed generalized concomitant Lasso (matrix noise variable).

    The covariance root S is re-optimized from the residual spectrum every
    ``s_update_every`` sweeps; convergence requires the B stationarity
    residual to stay within ``tol`` directly after an S update, so the
    reported pair (B_hat, S_hat) is a joint certificate.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    params = SmoothingParams(sigma_min, sigma_max)
    if not math.isfinite(sigma_max):
        raise ValueError("sigma_max must be finite for sgcl")
    X, Y, XT, col_sq = _prepare(data)
    n, p = X.shape
    q = Y.shape[1]
    B = _warm_B(b_init, p, q)
    R = Y - X @ B
    S = optimal_covariance_root(R, params)
    Sinv, WT, a = _sgcl_precompute(X, S)
    history = []
    converged = False
    epochs = 0
    burst_len = min(_CHECK_EVERY, s_update_every)
    buf = np.empty(burst_len)
    while epochs < max_epochs:
        burst = min(burst_len, max_epochs - epochs)
        _sgcl_burst(XT, WT, a, B, R, Sinv, float(np.trace(S)), lam, burst, buf)
        history.extend(buf[:burst])
        epochs += burst
        if epochs % s_update_every == 0:
            S = optimal_covariance_root(R, params)
            Sinv, WT, a = _sgcl_precompute(X, S)
        kkt = _stationarity_violation(X.T @ (Sinv @ R) / (n * q), B, lam)
        if kkt <= tol:
            # certify against the re-optimized covariance root
            S = optimal_covariance_root(R, params)
            Sinv, WT, a = _sgcl_precompute(X, S)
            kkt = _stationarity_violation(X.T @ (Sinv @ R) / (n * q), B, lam)
            if kkt <= tol:
                converged = True
                break
    R = Y - X @ B
    S = optimal_covariance_root(R, params)
    Sinv, _, _ = _sgcl_precompute(X, S)
    kkt = _stationarity_violation(X.T @ (Sinv @ R) / (n * q), B, lam)
    obj = smoothed_nuclear(R, params) + lam * float(np.linalg.norm(B, axis=1).sum())
    return FitResult(
        B_hat=B, residuals=R, objective=obj, epochs_run=epochs,
        kkt_violation=kkt, converged=converged, S_hat=S,
        objective_history=np.array(history),
    )


def fit_sgcl_annealed(data, lam, sigma_min, sigma_max, tol=1e-8, max_epochs=5_000,
                      stages=6, start_scale=None, b_init=None):
    """SGCL solved by continuation in the smoothing level.

    Alternating minimization stalls far from the optimum when sigma_min is
    orders of magnitude below the residual scale (near-degenerate smoothing,
    verified against an independent conic solve).  Annealing sigma_min
    geometrically from ``start_scale`` (default: half the residual RMS of
    the initialization) down to its target, warm-starting B at every stage,
    recovers the optimal objective to ~1e-6 relative.  The returned fit is
    from the final stage at the target sigma_min, with honest flags.
    """
    Y = data.Y
    n, q = Y.shape
    if start_scale is None:
        R0 = Y if b_init is None else Y - data.X @ as_matrix(b_init, "b_init")
        start_scale = 0.5 * float(np.linalg.norm(R0)) / math.sqrt(n * q)
    start_scale = min(max(start_scale, sigma_min), sigma_max)
    levels = np.geomspace(start_scale, sigma_min, stages) if start_scale > sigma_min \
        else np.array([sigma_min])
    b = b_init
    res = None
    for level in levels:
        res = fit_sgcl(data, lam, float(level), sigma_max, tol=tol,
                       max_epochs=max_epochs, s_update_every=1, b_init=b)
        b = res.B_hat
    return res


def fit(data, spec):
    """Dispatch a fit according to an :class:`EstimatorSpec`."""
    controls = dict(tol=spec.tol, max_epochs=spec.max_epochs)
    if spec.kind == "lasso":
        return fit_lasso(data, spec.lam, **controls)
    if spec.kind == "mt_lasso":
        return fit_mt_lasso(data, spec.lam, **controls)
    if spec.kind == "scl":
        return fit_scl(data, spec.lam, spec.sigma_min, **controls)
    if spec.kind == "sgcl":
        return fit_sgcl(data, spec.lam, spec.sigma_min, spec.sigma_max,
                        s_update_every=spec.s_update_every, **controls)
    raise ValueError(f"unknown estimator kind {spec.kind!r}")


def fit_path(data, spec, lambdas):
    """Warm-started fits along a descending lambda path.

    Returns one FitResult per lambda, reusing each solution as the next
    initialization; lambdas must be positive and strictly decreasing.
    """
    lams = np.asarray(lambdas, dtype=np.float64)
    if lams.ndim != 1 or lams.size == 0 or np.any(lams <= 0):
        raise ValueError("lambdas must be a nonempty positive 1-d sequence")
    if np.any(np.diff(lams) >= 0):
        raise ValueError("lambdas must be strictly decreasing for warm starts")
    results = []
    b = None
    for lam in lams:
        if spec.kind == "lasso":
            res = fit_lasso(data, lam, tol=spec.tol, max_epochs=spec.max_epochs, b_init=b)
        elif spec.kind == "mt_lasso":
            res = fit_mt_lasso(data, lam, tol=spec.tol, max_epochs=spec.max_epochs, b_init=b)
        elif spec.kind == "scl":
            res = fit_scl(data, lam, spec.sigma_min, tol=spec.tol,
                          max_epochs=spec.max_epochs, b_init=b)
        elif spec.kind == "sgcl":
            res = fit_sgcl(data, lam, spec.sigma_min, spec.sigma_max, tol=spec.tol,
                           max_epochs=spec.max_epochs,
                           s_update_every=spec.s_update_every, b_init=b)
        else:
            raise ValueError(f"unknown estimator kind {spec.kind!r}")
        results.append(res)
        b = res.B_hat
    return results


def lambda_max(kind, data, sigma_min=None, sigma_max=None):
    """Smallest regularization level yielding the all-zero solution."""
    X, Y = data.X, data.Y
    n = X.shape[0]
    q = Y.shape[1]
    corr = float(np.linalg.norm(X.T @ Y, axis=1).max())
    if kind == "lasso":
        if q != 1:
            raise ValueError(f"lasso expects q = 1, got q = {q}")
        value = corr / n
    elif kind == "mt_lasso":
        value = corr / (n * q)
    elif kind == "scl":
        if sigma_min is None or not sigma_min > 0:
            raise ValueError("scl lambda_max needs a positive sigma_min")
        sigma0 = max(sigma_min, float(np.linalg.norm(Y)) / math.sqrt(n * q))
        value = corr / (n * q * sigma0)
    elif kind == "sgcl":
        params = SmoothingParams(sigma_min, sigma_max)
        S0 = optimal_covariance_root(Y, params)
        w, V = np.linalg.eigh(S0)
        value = float(np.linalg.norm(X.T @ ((V / w) @ V.T @ Y), axis=1).max()) / (n * q)
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    if not value > 0:
        raise ValueError(f"degenerate data: lambda_max({kind}) is not positive")
    return value


def proposed_lambda(n, q, p, A):
    """Noise-free regularization level of the sup-norm analysis.

    Multitask (q >= 2, requires A > sqrt(2)):
        lam = 2 sqrt(2) / sqrt(nq) * (1 + A sqrt(log(p) / q))
    Single task (q = 1, requires A > 2 sqrt(2)):
        lam = A sqrt(2 log(p) / n)
    """
    if n < 1 or q < 1 or p < 1:
        raise ValueError("n, q, p must be positive counts")
    if q == 1:
        if not A > 2 * math.sqrt(2):
            raise ValueError(f"single-task proposed lambda needs A > 2*sqrt(2), got {A}")
        return A * math.sqrt(2 * math.log(p) / n)
    if not A > math.sqrt(2):
        raise ValueError(f"multitask proposed lambda needs A > sqrt(2), got {A}")
    return 2 * math.sqrt(2) / math.sqrt(n * q) * (1 + A * math.sqrt(math.log(p) / q))


def tiny_sigma_min(Y):
    """Near-zero smoothing level used to emulate the unsmoothed estimators."""
    Y = as_matrix(Y, "Y")
    value = 1e-6 * float(np.linalg.norm(Y)) / math.sqrt(Y.size)
    if not value > 0:
        raise ValueError("Y must be nonzero")
    return value


def default_sigma_max(Y):
    """Upper spectrum bound ``10 ||(Y Y^T / q)^{1/2}||_2`` for the matrix variable."""
    Y = as_matrix(Y, "Y")
    q = Y.shape[1]
    top = float(np.linalg.svd(Y / math.sqrt(q), compute_uv=False)[0])
    if not top > 0:
        raise ValueError("Y must be nonzero")
    return 10.0 * top
