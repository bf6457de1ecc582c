"""QP-type-agnostic interior point machinery.

The solvers in this package are infeasible-start predictor-corrector primal
dual interior point methods.  Everything here operates on flat multiplier /
slack vectors (plus an activity mask) and is independent of the QP type and
of how the KKT systems are factorized.

Two formulations of the Newton system are supported and selected through the
solver mode:

* delta formulation: the linear system is assembled with the current KKT
  residuals on the right-hand side and its solution is the Newton step;
* absolute formulation: the linearity of the stationarity, equality and
  inequality rows is exploited to put the raw problem data (g, b, d) on the
  right-hand side, the solution is the full-step candidate iterate, and the
  step is recovered by differencing.  This saves the residual matrix-vector
  products per iteration but suffers cancellation once the step becomes small
  relative to the iterate, which is why it is confined to the fastest mode.

Mode presets trade speed for robustness:

=========  ===========  =========  ==========  ==================
mode       formulation  residuals  refinement  factorization
=========  ===========  =========  ==========  ==================
speed_abs  absolute     at return  none        Cholesky
speed      delta        each iter  none        Cholesky
balance    delta        each iter  on demand   Cholesky, QR retry
robust     delta        each iter  on demand   QR always
=========  ===========  =========  ==========  ==================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "IpmArg",
    "Status",
    "SolverStats",
    "IterRecord",
    "mode_preset",
    "duality_measure",
    "max_step",
    "centering",
    "corrector_acceptance",
    "update_iterate_delta",
    "recover_step_absolute",
    "check_termination",
    "iterative_refinement",
]


class Status(enum.Enum):
    """Terminal state of a solve; numerical trouble is a status, not a raise."""

    Success = "Success"
    MaxIter = "MaxIter"
    MinStep = "MinStep"
    NaNDetected = "NaNDetected"
    Failure = "Failure"


@dataclass
class IpmArg:
    """Full algorithmic configuration of one solve.

    Build via :func:`mode_preset` and override fields as needed.  Tolerances
    must be positive; ``tol_comp`` bounds the duality measure, the other
    three bound the stationarity / equality / inequality residual infinity
    norms (ignored in speed_abs mode, whose exit test uses the duality
    measure only).

    ``lam_min``/``t_min`` clip the multipliers and slacks from below after
    every update, bounding the late-iteration ill-conditioning of the KKT
    system.  They also put a floor of roughly ``lam_min * max(t)`` under the
    reachable duality measure, so a ``tol_comp`` below that needs smaller
    clip values than the balance/robust presets use.
    """

    mode: str = "balance"
    iter_max: int = 30
    alpha_min: float = 1e-8
    mu0: float = 1e2
    tol_stat: float = 1e-8
    tol_eq: float = 1e-8
    tol_ineq: float = 1e-8
    tol_comp: float = 1e-8
    reg_prim: float = 0.0
    reg_dual: float = 0.0
    lam_min: float = 1e-16
    t_min: float = 1e-16
    t0: float = 1.0
    warm_start: str = "none"          # none | primal | primal_dual
    pred_corr: bool = True
    cond_pred_corr: bool = True
    corr_ratio: float = 1.5           # corrector acceptance threshold
    itref_corr_max: int = 0           # refinement steps on the combined direction
    itref_pred_max: int = 0           # refinement steps on the prediction
    itref_stop_ratio: float = 1e-12   # target residual/rhs ratio for refinement
    qr_fallback_ratio: float = 1e-6   # refinement residual ratio that triggers QR
    use_qr_fallback: bool = False
    use_qr_always: bool = False
    comp_res_pred: bool = True        # compute residuals each iteration
    abs_form: bool = False            # absolute formulation
    ftb: float = 0.995                # fraction-to-boundary factor
    kkt_method: str = "schur"         # dense equality handling: schur | null_space
    riccati_variant: str = "classical"  # classical | square_root

    def with_tol(self, tol):
        """Copy with all four exit tolerances set to ``tol``."""
        return replace(
            self, tol_stat=tol, tol_eq=tol, tol_ineq=tol, tol_comp=tol
        )

    def validate(self):
        for name in ("tol_stat", "tol_eq", "tol_ineq", "tol_comp"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.alpha_min < 1.0:
            raise ValueError("alpha_min must lie in (0, 1)")
        if self.lam_min < 0.0 or self.t_min < 0.0:
            raise ValueError("lam_min and t_min must be >= 0")
        if self.warm_start not in ("none", "primal", "primal_dual"):
            raise ValueError(f"unknown warm_start '{self.warm_start}'")
        return self


_PRESETS = {
    # speed_abs: everything geared to the lowest per-iteration cost.
    "speed_abs": dict(
        abs_form=True, comp_res_pred=False,
        itref_corr_max=0, itref_pred_max=0,
        use_qr_fallback=False, use_qr_always=False,
        lam_min=1e-16, t_min=1e-16,
    ),
    "speed": dict(
        abs_form=False, comp_res_pred=True,
        itref_corr_max=0, itref_pred_max=0,
        use_qr_fallback=False, use_qr_always=False,
        lam_min=1e-16, t_min=1e-16,
    ),
    "balance": dict(
        abs_form=False, comp_res_pred=True,
        itref_corr_max=2, itref_pred_max=0,
        use_qr_fallback=True, use_qr_always=False,
        lam_min=1e-10, t_min=1e-10,
    ),
    "robust": dict(
        abs_form=False, comp_res_pred=True,
        itref_corr_max=4, itref_pred_max=0,
        use_qr_fallback=True, use_qr_always=True,
        lam_min=1e-10, t_min=1e-10,
    ),
}


def mode_preset(mode):
    """Pre-defined argument set for one of the four solver modes."""
    try:
        overrides = _PRESETS[mode]
    except KeyError:
        raise ValueError(
            f"unknown mode '{mode}'; expected one of {sorted(_PRESETS)}"
        ) from None
    return IpmArg(mode=mode, **overrides)


@dataclass
class IterRecord:
    """One row of the per-iteration trace."""

    it: int
    alpha_aff: float
    alpha: float
    mu: float
    sigma: float
    res_g: float
    res_b: float
    res_d: float
    res_m: float


@dataclass
class SolverStats:
    """Outcome summary of one solve."""

    status: Status
    iterations: int
    res_g: float = np.nan
    res_b: float = np.nan
    res_d: float = np.nan
    res_m: float = np.nan
    mu: float = np.nan
    flops: int = 0
    trace: list = field(default_factory=list)


def duality_measure(lam, t, act=None):
    """Average complementarity lam' t / n over active rows.

    Returns 0.0 for an empty active set (the problem is then equality
    constrained only and the caller should treat complementarity as
    satisfied); no exception is raised for that case.
    """
    if act is not None:
        lam = lam[act]
        t = t[act]
    n = lam.shape[0]
    if n == 0:
        return 0.0
    return float(lam @ t) / n


def max_step(lam, t, dlam, dt, act=None, ftb=1.0):
    """Largest alpha in (0, 1] keeping lam + alpha dlam >= 0 and t + alpha dt >= 0.

    ``ftb`` scales the blocking ratio (fraction-to-boundary); it multiplies
    the ratio before the cap at 1, so an unblocked direction still yields a
    unit step.
    """
    if act is not None:
        lam, t, dlam, dt = lam[act], t[act], dlam[act], dt[act]
    ratio = np.inf
    neg = dlam < 0.0
    if np.any(neg):
        ratio = min(ratio, float(np.min(-lam[neg] / dlam[neg])))
    neg = dt < 0.0
    if np.any(neg):
        ratio = min(ratio, float(np.min(-t[neg] / dt[neg])))
    return min(1.0, ftb * ratio)


def centering(mu, mu_aff):
    """Centering parameter sigma = (mu_aff / mu)^3 clipped to [0, 1]."""
    if mu <= 0.0:
        return 0.0
    return min(1.0, max(0.0, (mu_aff / mu) ** 3))


def corrector_acceptance(mu_pcc, mu_aff, threshold=1.5):
    """Keep the corrected direction only if it does not inflate complementarity.

    True iff the trial duality measure after the full
    predictor-centering-corrector step stays within ``threshold`` times the
    affine one.
    """
    return mu_pcc <= threshold * mu_aff


def update_iterate_delta(iterate, step, alpha, act=None, lam_min=0.0, t_min=0.0):
    """In-place iterate += alpha * step, clipping active lam/t from below.

    The lower bounds keep late-iteration multiplier/slack ratios bounded and
    with them the conditioning of the KKT system.  Deactivated rows are left
    untouched at zero.
    """
    iterate.y += alpha * step.y
    iterate.pi += alpha * step.pi
    lam = iterate.lam + alpha * step.lam
    t = iterate.t + alpha * step.t
    if act is None:
        np.maximum(lam, lam_min, out=lam)
        np.maximum(t, t_min, out=t)
    else:
        lam = np.where(act, np.maximum(lam, lam_min), lam)
        t = np.where(act, np.maximum(t, t_min), t)
    iterate.lam[:] = lam
    iterate.t[:] = t
    return iterate


def recover_step_absolute(iterate, iterate_full):
    """Newton step from the absolute formulation: componentwise difference.

    Cancellation warning: once the two points nearly coincide the difference
    loses relative accuracy at machine precision; this is inherent to the
    absolute formulation and the reason the delta formulation is preferred in
    the accurate modes.
    """
    return iterate_full.diff(iterate)


def check_termination(res, mu, alpha_last, it, arg):
    """Return a terminal Status or None to continue.

    speed_abs exits on the duality measure, the iteration cap and the
    minimum step length only; the other modes additionally require the
    stationarity / equality / inequality residual norms to meet their
    tolerances before declaring success.
    """
    if res is not None and not res.isfinite():
        return Status.NaNDetected
    if not np.isfinite(mu):
        return Status.NaNDetected
    # a collapsed step length means stalling, not convergence: it outranks
    # the tolerance test (success demands alpha >= alpha_min throughout)
    if alpha_last < arg.alpha_min:
        return Status.MinStep
    if mu <= arg.tol_comp:
        if arg.mode == "speed_abs" or res is None:
            return Status.Success
        if (
            res.res_g <= arg.tol_stat
            and res.res_b <= arg.tol_eq
            and res.res_d <= arg.tol_ineq
            and res.res_m <= arg.tol_comp
        ):
            return Status.Success
    if it >= arg.iter_max:
        return Status.MaxIter
    return None


def iterative_refinement(solve, apply_kkt, rhs, delta0, max_steps, stop_ratio):
    """Refine a linear-system solution against the unfactorized matrix.

    ``solve(r)`` must return x with K_fact @ x = -r (the factorization's
    solve convention), ``apply_kkt(x)`` must return K @ x for the exact,
    unregularized matrix, and ``delta0`` should satisfy
    K_fact @ delta0 = -rhs approximately.  The refinement residual is
    ``K @ delta + rhs``; each step solves the factorized system against it
    and adds the correction.

    Stops after ``max_steps`` corrections, or as soon as the residual norm is
    at most ``stop_ratio * max(1, ||rhs||_inf)``, or (divergence guard) when
    the residual norm grows for two consecutive corrections.  The best
    iterate seen is returned, so the result never has a larger residual norm
    than ``delta0``.

    Returns ``(delta, final_norm, steps_applied)``.
    """
    scale = max(1.0, _vec_norm(rhs))
    best = delta0
    res = apply_kkt(delta0) + rhs
    best_norm = _vec_norm(res)
    if max_steps <= 0 or best_norm <= stop_ratio * scale:
        return best, best_norm, 0
    delta = delta0
    norm = best_norm
    grew = 0
    steps = 0
    for _ in range(max_steps):
        corr = solve(res)
        delta = delta + corr
        steps += 1
        res = apply_kkt(delta) + rhs
        new_norm = _vec_norm(res)
        if new_norm < best_norm:
            best, best_norm = delta, new_norm
        grew = grew + 1 if new_norm >= norm else 0
        norm = new_norm
        if new_norm <= stop_ratio * scale:
            break
        if grew >= 2:
            break
    return best, best_norm, steps


def _vec_norm(v):
    return float(np.max(np.abs(v))) if v.size else 0.0
