"""Shared oracles for the test suite.

Everything here is deliberately independent of the library's own
integration paths: quantile inversion by bracketed root find on the
closed-form hazard, means via the survival function, and histogram
synthesis by exact CDF differences plus a multinomial draw.
"""

import numpy as np
from scipy import integrate, optimize

from spadrate import er
from spadrate.inference import IntervalHistogram

PAPER = er.ErParams(eta0=0.19117, tau_d=80.09205e-6, tau_r=112.5e-9)


def hazard_time(r_star: float, tau_r: float, hazard: float) -> float:
    """Time at which the ER integrated hazard reaches the given value."""
    f = lambda t: er.er_cumulative_hazard(t, r_star, tau_r) - hazard
    hi = max(hazard / r_star, 1e-30)
    while f(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(f, 0.0, hi, rtol=1e-14, maxiter=200))


def er_quantile(r_star: float, tau_r: float, q: float) -> float:
    """Detector-on time at which the ER CDF reaches q."""
    return hazard_time(r_star, tau_r, -np.log1p(-q))


def mean_via_survival(r_star: float, tau_r: float) -> float:
    """Mean on-time through integral of the survival function.

    Independent route from the library's integral of t * pdf(t).
    """
    points = [0.0] + [hazard_time(r_star, tau_r, h)
                      for h in (0.05, 0.25, 1.0, 3.0, 8.0, 16.0, 30.0, 45.0)]
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        val, _ = integrate.quad(
            lambda t: er.er_ccdf(t, r_star, tau_r), a, b,
            epsabs=0.0, epsrel=1e-12, limit=200,
        )
        total += val
    return total


def integrate_pdf(r_star: float, tau_r: float) -> float:
    """Total probability mass of the ER pdf, with the tail taken from the ccdf."""
    points = [0.0] + [hazard_time(r_star, tau_r, h)
                      for h in (0.05, 0.25, 1.0, 3.0, 8.0, 16.0, 30.0, 45.0)]
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        val, _ = integrate.quad(
            lambda t: er.er_pdf(t, r_star, tau_r), a, b,
            epsabs=0.0, epsrel=1e-12, limit=200,
        )
        total += val
    return total + float(er.er_ccdf(points[-1], r_star, tau_r))


def argmax_er_pdf(r_star: float, tau_r: float) -> float:
    """Location of the pdf maximum: log-grid search plus bounded refinement."""
    grid = np.logspace(-14, np.log10(hazard_time(r_star, tau_r, 10.0)), 4000)
    i = int(np.argmax(er.er_pdf(grid, r_star, tau_r)))
    lo, hi = grid[max(i - 2, 0)], grid[min(i + 2, grid.size - 1)]
    res = optimize.minimize_scalar(
        lambda t: -er.er_pdf(t, r_star, tau_r),
        bounds=(lo, hi), method="bounded", options={"xatol": lo * 1e-10},
    )
    return float(res.x)


def multinomial_interval_hist(
    r_star: float,
    params: er.ErParams,
    n_events: int,
    seed: int,
    bin_width: float = 1e-9,
) -> IntervalHistogram:
    """Histogram drawn multinomially from exact per-bin interval probabilities."""
    source = er.SourceParams(photon_rate=r_star / params.eta0)
    t_max = hazard_time(r_star, params.tau_r, 30.0)
    lo_bin = int(np.floor(params.tau_d / bin_width))
    hi_bin = int(np.ceil((params.tau_d + t_max) / bin_width)) + 1
    edges = np.arange(lo_bin, hi_bin + 1) * bin_width
    probs = np.clip(np.diff(er.er_interval_cdf(edges, params, source)), 0.0, None)
    probs /= probs.sum()
    counts = np.random.default_rng(seed).multinomial(n_events, probs)
    full = np.zeros(hi_bin, dtype=np.int64)
    full[lo_bin:] = counts
    return IntervalHistogram(bin_width=bin_width, counts=full)
