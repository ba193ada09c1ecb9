"""Mean-level paralyzing extension of the exponential-recovery model.

At very high flux an avalanche may fire while the excess bias is still too
low to trip the latching circuit.  Such an event produces no timestamp but
still quenches the diode, extending the insensitive period.  The extension
is modeled at mean level only: no probability density is claimed for the
paralyzing case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import er
from .exceptions import FitError

__all__ = [
    "ParalyzingParams",
    "ParalyzingFit",
    "paralyzation_prob",
    "mean_conditional_on_time",
    "mean_single_prolongation",
    "mean_paralyzation_count",
    "paralyzing_mean_on_time",
    "fit_paralyzing",
]


@dataclass(frozen=True)
class ParalyzingParams:
    """Paralyzable-time window and per-event dead-time extension, both in s."""

    tau_p1: float = 0.0
    tau_p2: float = 0.0

    def __post_init__(self):
        if self.tau_p1 < 0 or self.tau_p2 < 0:
            raise ValueError("paralyzing time constants must be non-negative")


def paralyzation_prob(pp: ParalyzingParams, r_star: float, tau_r: float) -> float:
    """Probability that an avalanche fires within tau_p1 of recovery start."""
    if pp.tau_p1 == 0.0:
        return 0.0
    return float(er.er_cdf(pp.tau_p1, r_star, tau_r))


def mean_conditional_on_time(pp: ParalyzingParams, r_star: float, tau_r: float) -> float:
    """Mean avalanche time given that it happened before tau_p1.

    Always strictly below tau_p1; approaches (2/3) tau_p1 when the hazard
    accumulated over the window is small (linear-density limit).
    """
    p = paralyzation_prob(pp, r_star, tau_r)
    if p <= 0.0:
        raise ValueError("conditional on-time undefined: paralyzation probability is zero")
    num, err = integrate.quad(
        lambda t: t * er.er_pdf(t, r_star, tau_r),
        0.0,
        pp.tau_p1,
        epsabs=0.0,
        epsrel=1e-11,
        limit=200,
    )
    return num / p


def mean_single_prolongation(pp: ParalyzingParams, r_star: float, tau_r: float) -> float:
    """Average dead-time extension per paralyzation event."""
    return mean_conditional_on_time(pp, r_star, tau_r) + pp.tau_p2


def mean_paralyzation_count(p_p: float) -> float:
    """Mean of the geometric number of consecutive paralyzations, p/(1-p)."""
    if not 0.0 <= p_p < 1.0:
        raise ValueError(f"paralyzation probability must be in [0, 1), got {p_p}")
    return p_p / (1.0 - p_p)


def paralyzing_mean_on_time(pp: ParalyzingParams, r_star: float, tau_r: float) -> float:
    """Mean time between dead-time end and the next registered detection."""
    base = er.er_mean_on_time(r_star, tau_r)
    p = paralyzation_prob(pp, r_star, tau_r)
    if p == 0.0:
        return base
    return base + mean_paralyzation_count(p) * mean_single_prolongation(pp, r_star, tau_r)


@dataclass(frozen=True)
class ParalyzingFit:
    params: ParalyzingParams
    stderr: tuple[float, float]
    cost: float
    n_points: int


def fit_paralyzing(
    points,
    params: er.ErParams,
    *,
    init: ParalyzingParams | None = None,
) -> ParalyzingFit:
    """Weighted least squares for (tau_p1, tau_p2) on mean on-time data.

    ``points`` is a sequence of (r_star, mean_on_time) pairs spanning the
    detection-rate rollover.  Each point is weighted by 1/r^3 with r the
    measured rate 1/(mean + tau_d) at that point.  Uncertainties are the
    1-sigma values from the Jacobian at the solution.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (r_star, mean_on_time) points")
    r_stars = pts[:, 0]
    means = pts[:, 1]
    rates = 1.0 / (means + params.tau_d)
    weights = rates**-3
    weights = weights / weights.max()
    sqrt_w = np.sqrt(weights)

    # The recovery-only mean does not depend on the fit parameters.
    base = np.array([er.er_mean_on_time(rs, params.tau_r) for rs in r_stars])

    def model(x):
        tau_p1, tau_p2 = x
        pp = ParalyzingParams(tau_p1=tau_p1, tau_p2=tau_p2)
        out = np.empty_like(base)
        for i, rs in enumerate(r_stars):
            p = paralyzation_prob(pp, rs, params.tau_r)
            if p == 0.0:
                out[i] = base[i]
            else:
                out[i] = base[i] + mean_paralyzation_count(p) * (
                    mean_conditional_on_time(pp, rs, params.tau_r) + tau_p2
                )
        return out

    def residuals(x):
        return sqrt_w * (model(x) - means)

    x0 = (
        np.array([init.tau_p1, init.tau_p2])
        if init is not None
        else np.array([params.tau_r / 10.0, params.tau_r / 10.0])
    )
    res = optimize.least_squares(
        residuals,
        x0,
        bounds=(np.zeros(2), np.full(2, np.inf)),
        method="trf",
        diff_step=1e-6,
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
    )
    if not res.success:
        raise FitError(
            f"paralyzing fit did not converge: {res.message}",
            details={"residuals": res.fun.tolist(), "x": res.x.tolist()},
        )
    dof = max(len(means) - 2, 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        stderr = tuple(np.sqrt(np.maximum(np.diag(cov), 0.0)))
    except np.linalg.LinAlgError:
        stderr = (np.nan, np.nan)
    return ParalyzingFit(
        params=ParalyzingParams(tau_p1=float(res.x[0]), tau_p2=float(res.x[1])),
        stderr=(float(stderr[0]), float(stderr[1])),
        cost=float(res.cost),
        n_points=len(means),
    )
