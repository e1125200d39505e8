"""Machine-checkable certificates for the sparse-recovery theory.

Every quantity the analysis manipulates is computable on a concrete
instance: the mutual-incoherence level of a design, restricted-eigenvalue
ratios over the cone, the cone inequality itself, concentration-event
memberships for a given noise draw, and the sup-norm error bound with its
explicit constant.  Events use strict/non-strict inequalities exactly as
defined; ties resolve to false.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, norm_l21, norm_l2inf, svd

EVENT_IDS = ("C1", "C1'", "C2", "C3", "C4", "C5", "C6", "A1", "A2")


def incoherence_alpha(X, s):
    """Largest alpha such that the design is incoherent at sparsity *s*.

    With m the largest off-diagonal entry (in absolute value) of the Gram
    matrix X^T X / n, returns ``1 / (7 s m)``, or inf when m = 0; the
    incoherence condition holds at (alpha, s) iff the returned value is
    >= alpha.  Columns must be scaled so the Gram diagonal is 1.
    """
    A = as_matrix(X, "X")
    if s < 1:
        raise ValueError(f"s must be a positive count, got {s}")
    n = A.shape[0]
    psi = A.T @ A / n
    diag = np.diag(psi)
    bad = np.nonzero(np.abs(diag - 1.0) > 1e-8)[0]
    if bad.size:
        raise ValueError(
            f"column {bad[0]} of X is not normalized: Gram diagonal is {diag[bad[0]]}"
        )
    off = psi - np.diag(diag)
    m = float(np.abs(off).max())
    if m == 0.0:
        return math.inf
    return 1.0 / (7.0 * s * m)


def cone_ratio(delta, support):
    """Mass ratio ``l21(delta off support) / l21(delta on support)``.

    Returns inf when the on-support part vanishes but the off-support part
    does not, and 0 when both vanish.
    """
    D = as_matrix(delta, "delta")
    idx = _support_indices(support, D.shape[0])
    mask = np.zeros(D.shape[0], dtype=bool)
    mask[idx] = True
    on = float(np.linalg.norm(D[mask], axis=1).sum()) if idx.size else 0.0
    off = float(np.linalg.norm(D[~mask], axis=1).sum())
    if on == 0.0:
        return 0.0 if off == 0.0 else math.inf
    return off / on


def _support_indices(support, p):
    idx = np.asarray(sorted(int(j) for j in support), dtype=np.intp)
    if idx.size and (idx[0] < 0 or idx[-1] >= p):
        raise ValueError(f"support indices must lie in [0, {p}), got {idx}")
    return idx


def eta(lam, B_star, sigma_star):
    """Smallest eta with ``lam * l21(B_star) <= eta * sigma_star``."""
    if not sigma_star > 0:
        raise ValueError(f"sigma_star must be positive, got {sigma_star}")
    return lam * norm_l21(B_star) / sigma_star


def supnorm_constant(alpha):
    """The explicit constant ``1 + 16 / (7 (alpha - 1))`` of the sup-norm bound."""
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    return 1.0 + 16.0 / (7.0 * (alpha - 1.0))


def supnorm_bound_check(fit, data, lam, alpha):
    """Evaluate the high-probability sup-norm error bound on one fit.

    Returns ``(lhs, rhs, holds)`` with ``lhs = l2inf(B_hat - B_star) / q``
    and ``rhs = C(alpha) * (3 + eta) * lam * sigma_star``.
    """
    if data.truth is None:
        raise ValueError("supnorm_bound_check needs ground truth on the dataset")
    C = supnorm_constant(alpha)
    B_star = data.truth.B_star
    q = data.q
    lhs = norm_l2inf(fit.B_hat - B_star) / q
    rhs = C * (3.0 + eta(lam, B_star, data.truth.sigma_star)) * lam * data.truth.sigma_star
    return lhs, rhs, bool(lhs <= rhs)


def estimate_support(B_hat, threshold=0.0):
    """Rows of B_hat whose scaled norm ``||row||_2 / q`` exceeds *threshold*.

    With threshold 0 this is the exact nonzero-row support (the solvers
    produce exact zeros through block soft-thresholding).
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    B = as_matrix(B_hat, "B_hat")
    q = B.shape[1]
    scaled = np.linalg.norm(B, axis=1) / q
    return frozenset(int(j) for j in np.nonzero(scaled > threshold)[0])


def recovery_metrics(support_hat, support_star):
    """Hard recovery flag and true/false positive counts."""
    hat = frozenset(int(j) for j in support_hat)
    star = frozenset(int(j) for j in support_star)
    return {
        "hard": int(hat == star),
        "true_positives": len(hat & star),
        "false_positives": len(hat - star),
    }


# ---------------------------------------------------------------------------
# concentration events

def event_lambda(event_id, n, q, p, A, sigma_star):
    """Regularization level each event's probability bound is stated at."""
    if event_id in ("C1",):
        return A * sigma_star * math.sqrt(math.log(p) / n)
    if event_id in ("C1'",):
        return A * math.sqrt(2.0 * math.log(p) / n)
    if event_id in ("C2",):
        return 2.0 * sigma_star / math.sqrt(n * q) * (1.0 + A * math.sqrt(math.log(p) / q))
    if event_id in ("C3", "A1", "A2"):
        return 2.0 * math.sqrt(2.0) / math.sqrt(n * q) * (1.0 + A * math.sqrt(math.log(p) / q))
    if event_id in ("C4", "C5", "C6"):
        return math.nan  # the event does not involve lambda
    raise ValueError(f"unknown event id {event_id!r}")


def event_holds(event_id, X, E, lam, sigma_star):
    """Membership of one noise draw in the named concentration event.

    The single-task events C1 and C1' are evaluated through the row-norm
    (l2inf) statistic, which coincides with the absolute-value form at q=1.
    """
    if event_id not in EVENT_IDS:
        raise ValueError(f"unknown event id {event_id!r}, expected one of {EVENT_IDS}")
    if not sigma_star > 0:
        raise ValueError(f"sigma_star must be positive, got {sigma_star}")
    Xm = as_matrix(X, "X")
    Em = as_matrix(E, "E")
    if Xm.shape[0] != Em.shape[0]:
        raise ValueError(f"X has {Xm.shape[0]} rows but E has {Em.shape[0]}")
    n, q = Em.shape

    if event_id == "C4":
        rms = float(np.linalg.norm(Em)) / math.sqrt(n * q)
        return bool(sigma_star / math.sqrt(2.0) < rms < 2.0 * sigma_star)
    if event_id in ("C5", "C6"):
        eigs = np.linalg.eigvalsh(Em @ Em.T / q)
        if event_id == "C5":
            return bool(eigs.min() > sigma_star * sigma_star / 2.0)
        return bool(eigs.max() < 4.0 * sigma_star * sigma_star)
    if event_id == "A2":
        return (event_holds("C3", Xm, Em, lam, sigma_star)
                and event_holds("C5", Xm, Em, lam, sigma_star)
                and event_holds("C6", Xm, Em, lam, sigma_star))

    corr = float(np.linalg.norm(Xm.T @ Em, axis=1).max())
    if event_id == "C1":
        return bool(corr / n <= lam / 2.0)
    if event_id == "C1'":
        return bool(corr / n <= lam * sigma_star / (2.0 * math.sqrt(2.0)))
    if event_id == "C2":
        return bool(corr / (n * q) <= lam / 2.0)
    if event_id == "C3":
        return bool(corr / (n * q) <= lam * sigma_star / (2.0 * math.sqrt(2.0)))
    # A1: normalized correlation part plus the Frobenius window C4
    fro = float(np.linalg.norm(Em))
    if fro == 0.0:
        return False
    part1 = corr / (math.sqrt(n * q) * fro) <= lam / 2.0
    return bool(part1 and event_holds("C4", Xm, Em, lam, sigma_star))


# concentration constant of the extreme-eigenvalue bounds (c >= 1/32)
_EIG_C = 1.0 / 32.0


def event_probability_bound(event_id, n, q, p, A=None):
    """Closed-form lower bound on the event probability, clamped to [0, 1].

    The p-dependent bounds hold for any A > 0 (they are Gaussian/chi tail
    computations); A only needs to exceed sqrt(2) (resp. 2 sqrt(2)) for the
    bound to be nontrivial.
    """
    if event_id not in EVENT_IDS:
        raise ValueError(f"unknown event id {event_id!r}, expected one of {EVENT_IDS}")
    needs_A = event_id not in ("C4", "C5", "C6")
    if needs_A:
        if A is None or not A > 0:
            raise ValueError(f"event {event_id} needs A > 0, got {A}")
    if event_id in ("C1", "C1'"):
        raw = 1.0 - 2.0 * p ** (1.0 - A * A / 8.0)
    elif event_id in ("C2", "C3"):
        raw = 1.0 - p ** (1.0 - A * A / 2.0)
    elif event_id == "C4":
        raw = 1.0 - (1.0 + math.e ** 2) * math.exp(-n * q / 24.0)
    elif event_id == "C5":
        raw = 1.0 - n * math.exp(-_EIG_C * q / (2.0 * n))
    elif event_id == "C6":
        raw = 1.0 - n * math.exp(-_EIG_C * q / n)
    elif event_id == "A1":
        raw = (1.0 - p ** (1.0 - A * A / 2.0)
               - (1.0 + math.e ** 2) * math.exp(-n * q / 24.0))
    else:  # A2
        raw = 1.0 - p ** (1.0 - A * A / 2.0) - 2.0 * n * math.exp(-_EIG_C * q / (2.0 * n))
    return min(1.0, max(0.0, raw))


# ---------------------------------------------------------------------------
# restricted-eigenvalue search and the incoherence chain

def _project_cone(D, mask, limit=3.0):
    """Rescale the off-support block of D onto the cone boundary if needed."""
    on = np.linalg.norm(D[mask], axis=1).sum()
    off = np.linalg.norm(D[~mask], axis=1).sum()
    if off > limit * on and off > 0:
        D = D.copy()
        D[~mask] *= limit * on / off
    return D


def rep_ratio(X, support, trials=1000, seed=0, q=1, descent_steps=40):
    """Randomized upper bound on the restricted-eigenvalue constant.

    Samples *trials* directions in the cone ``l21(off) <= 3 l21(on)``,
    refines the best candidates by projected gradient descent on
    ``||X D||_F^2`` (with the on-support block renormalized), and returns the
    smallest ratio ``||X D||_F / (sqrt(n) ||D_on||_F)`` encountered.
    """
    A = as_matrix(X, "X")
    n, p = A.shape
    idx = _support_indices(support, p)
    if idx.size == 0:
        raise ValueError("support must be nonempty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    mask = np.zeros(p, dtype=bool)
    mask[idx] = True
    rng = np.random.Generator(np.random.Philox(key=[seed & (2 ** 64 - 1), 0x52455052]))
    G = A.T @ A  # descent uses grad ||XD||^2 = 2 G D

    def ratio(D):
        on = np.linalg.norm(D[mask])
        if on == 0.0:
            return math.inf
        return float(np.linalg.norm(A @ D) / (math.sqrt(n) * on))

    best = math.inf
    candidates = []
    for _ in range(trials):
        D = rng.standard_normal((p, q))
        D[~mask] *= rng.uniform(0.0, 1.0) * 3.0 * np.linalg.norm(D[mask], axis=1).sum() / max(
            np.linalg.norm(D[~mask], axis=1).sum(), 1e-300)
        r = ratio(D)
        if r < best:
            best = r
            candidates.append(D)
    for D in candidates[-3:]:
        D = D / max(np.linalg.norm(D[mask]), 1e-300)
        step = 0.5 / max(np.linalg.norm(G, 2), 1e-300)
        for _ in range(descent_steps):
            D = D - step * 2.0 * (G @ D)
            on = np.linalg.norm(D[mask])
            if on == 0.0:
                break
            D = _project_cone(D / on, mask)
            best = min(best, ratio(D))
    return best


def delta_psi_chain_check(delta, X, alpha, support):
    """Check ``l2inf(delta) <= C(alpha) * l2inf(Psi delta)`` on a cone element.

    Preconditions are reported distinctly: *delta* must satisfy the cone
    inequality at the given support, and the design must be incoherent at
    (alpha, |support|).
    """
    D = as_matrix(delta, "delta")
    A = as_matrix(X, "X")
    idx = _support_indices(support, D.shape[0])
    # the cone is closed; allow rounding noise exactly at the boundary
    if cone_ratio(D, idx) > 3.0 * (1.0 + 1e-12):
        raise ValueError("delta violates the cone precondition l21(off) <= 3 l21(on)")
    achievable = incoherence_alpha(A, max(idx.size, 1))
    if achievable < alpha * (1.0 - 1e-9):
        raise ValueError(
            f"design is not incoherent at alpha={alpha}, s={idx.size}: "
            f"achievable alpha is {achievable}"
        )
    n = A.shape[0]
    psi_delta = (A.T @ (A @ D)) / n
    return bool(norm_l2inf(D) <= supnorm_constant(alpha) * norm_l2inf(psi_delta))


def residual_spectrum(fit):
    """Singular values of the fit residuals, nonincreasing."""
    return svd(fit.residuals).singular_values


def dantzig_margin(fit, data, lam):
    """Slack ``rhs - lhs`` of the fitted estimator's Dantzig inequality.

    The inequality is ``corr <= lam_eff`` with ``corr`` the (1/nq)-scaled
    l2inf correlation of the design with the residuals (preconditioned by
    S^{-1} when a matrix noise estimate is present) and ``lam_eff`` the
    effective penalty level (lam, lam * sigma_hat, or lam itself).
    """
    X = data.X
    n, q = data.n, data.q
    if fit.S_hat is not None:
        w, V = np.linalg.eigh(fit.S_hat)
        corr = float(np.linalg.norm(X.T @ ((V / w) @ V.T @ fit.residuals), axis=1).max()) / (n * q)
        rhs = lam
    elif fit.sigma_hat is not None:
        corr = float(np.linalg.norm(X.T @ fit.residuals, axis=1).max()) / (n * q)
        rhs = lam * fit.sigma_hat
    else:
        corr = float(np.linalg.norm(X.T @ fit.residuals, axis=1).max()) / (n * q)
        rhs = lam
    return rhs - corr


@dataclass(frozen=True)
class DiagnosticsReport:
    """Flat bundle of certificate values for one fitted instance."""

    dantzig_margin: float
    incoherence_alpha: float
    rep_ratio: float
    cone_ratio: float
    eta: float
    supnorm_lhs: float
    supnorm_rhs: float
    events: dict = field(default_factory=dict)
    support_hat: frozenset = frozenset()
    recovery: dict | None = None

    def to_json(self):
        return {
            "dantzig_margin": self.dantzig_margin,
            "incoherence_alpha": self.incoherence_alpha,
            "rep_ratio": self.rep_ratio,
            "cone_ratio": self.cone_ratio,
            "eta": self.eta,
            "supnorm_lhs": self.supnorm_lhs,
            "supnorm_rhs": self.supnorm_rhs,
            "events": dict(sorted(self.events.items())),
            "support_hat": sorted(self.support_hat),
            "recovery": self.recovery,
        }


def diagnostics_report(data, fit_result, lam, s=None, alpha=None, A=2.0,
                       rep_trials=200, seed=0):
    """Assemble a :class:`DiagnosticsReport` for a fitted dataset.

    Ground-truth-dependent entries (eta, sup-norm bound, events, recovery)
    are NaN/empty when the dataset carries no truth.  *s* defaults to the
    true support size (or the fitted one), *alpha* to the design's
    achievable incoherence level.
    """
    truth = data.truth
    support_hat = estimate_support(fit_result.B_hat, 0.0)
    if s is None:
        s = len(truth.support_star) if truth is not None else max(len(support_hat), 1)
    s = max(int(s), 1)
    try:
        alpha_hat = incoherence_alpha(data.X, s)
    except ValueError:
        alpha_hat = math.nan  # incoherence is undefined for unnormalized designs
    if alpha is None:
        alpha = alpha_hat
    margin = dantzig_margin(fit_result, data, lam)

    if truth is not None:
        delta = fit_result.B_hat - truth.B_star
        cratio = cone_ratio(delta, truth.support_star)
        eta_val = eta(lam, truth.B_star, truth.sigma_star)
        if math.isfinite(alpha) and alpha > 1:
            lhs, rhs, _ = supnorm_bound_check(fit_result, data, lam, alpha)
        else:
            lhs = norm_l2inf(delta) / data.q
            rhs = math.nan
        E = data.Y - data.X @ truth.B_star
        events = {
            ev: event_holds(ev, data.X, E, lam, truth.sigma_star) for ev in EVENT_IDS
        }
        rep = rep_ratio(data.X, truth.support_star, trials=rep_trials, seed=seed)
        recovery = recovery_metrics(support_hat, truth.support_star)
    else:
        cratio = math.nan
        eta_val = math.nan
        lhs = math.nan
        rhs = math.nan
        events = {}
        rep = rep_ratio(data.X, support_hat, trials=rep_trials, seed=seed) \
            if support_hat else math.nan
        recovery = None

    return DiagnosticsReport(
        dantzig_margin=margin,
        incoherence_alpha=alpha_hat,
        rep_ratio=rep,
        cone_ratio=cratio,
        eta=eta_val,
        supnorm_lhs=lhs,
        supnorm_rhs=rhs,
        events=events,
        support_hat=support_hat,
        recovery=recovery,
    )
