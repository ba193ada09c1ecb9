"""Histogramming, model fitting, and a-priori-rate inference.

The measured inter-detection intervals are binned, and the binned counts
are fitted by maximising the Poisson likelihood of the expected counts

    mu_j = scale * total * bin_width * interval_pdf(bin_center_j)

over (r_star, tau_d, tau_r, scale), any subset of which may be held
fixed.  The histogram alone identifies only the combined a priori rate
r_star = eta0 * photon_rate + dark rate; the asymptotic efficiency eta0
is recovered afterwards when a calibrated photon rate is supplied.

Poisson MLE is preferred over least squares because bins are counted
data: it is exact for empty tail bins and needs no ad hoc variance model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import er, nhpp
from .exceptions import DegenerateDataError, FitError

__all__ = [
    "IntervalHistogram",
    "FitResult",
    "InferredRate",
    "build_histogram",
    "fit_er_histogram",
    "infer_apriori_rate",
    "dark_count_rate_from_measurement",
]

_PARAM_NAMES = ("r_star", "tau_d", "tau_r", "scale")
_MU_FLOOR = 1e-300


@dataclass
class IntervalHistogram:
    """Counts of inter-detection intervals in uniform half-open bins.

    Bin j covers [origin + j*bin_width, origin + (j+1)*bin_width); a value
    exactly on an edge belongs to the bin starting there.  Values outside
    the configured range are dropped and tallied in ``overflow``.
    """

    bin_width: float
    counts: np.ndarray
    origin: float = 0.0
    overflow: int = 0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be positive, got {self.bin_width}")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_lefts(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.counts.size)

    @property
    def bin_centers(self) -> np.ndarray:
        return self.bin_lefts + 0.5 * self.bin_width

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left_s", "count"])
            for left, count in zip(self.bin_lefts, self.counts):
                writer.writerow([f"{left:.17g}", int(count)])

    @classmethod
    def from_csv(cls, path) -> "IntervalHistogram":
        lefts: list[float] = []
        counts: list[int] = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["bin_left_s", "count"]:
                raise ValueError(f"{path}: expected header 'bin_left_s,count'")
            for row in reader:
                if not row:
                    continue
                lefts.append(float(row[0]))
                counts.append(int(row[1]))
        if not lefts:
            return cls(bin_width=1.0, counts=np.zeros(0, dtype=np.int64))
        if len(lefts) == 1:
            raise ValueError(f"{path}: cannot infer bin width from a single bin")
        widths = np.diff(lefts)
        width = float(widths[0])
        if not np.allclose(widths, width, rtol=1e-6, atol=0):
            raise ValueError(f"{path}: bins are not uniform")
        return cls(bin_width=width, counts=np.asarray(counts), origin=float(lefts[0]))


def build_histogram(
    intervals,
    bin_width: float,
    bounds: tuple[float, float] | None = None,
    origin: float = 0.0,
) -> IntervalHistogram:
    """Bin intervals by floor((x - origin) / bin_width).

    With ``bounds = (lo, hi)`` the origin is lo and values outside
    [lo, hi) go to the overflow tally.  Without bounds, everything at or
    above ``origin`` is kept and the bin array extends to the maximum.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    values = np.asarray(intervals, dtype=float)
    if values.size == 0:
        return IntervalHistogram(bin_width=bin_width, counts=np.zeros(0, dtype=np.int64),
                                 origin=bounds[0] if bounds else origin)
    if bounds is not None:
        lo, hi = bounds
        if hi <= lo:
            raise ValueError("bounds must satisfy lo < hi")
        origin = lo
        n_bins = int(np.ceil((hi - lo) / bin_width - 1e-12))
    else:
        n_bins = None
    idx = np.floor((values - origin) / bin_width).astype(np.int64)
    if n_bins is None:
        in_range = idx >= 0
        n_bins = int(idx[in_range].max()) + 1 if np.any(in_range) else 0
    else:
        in_range = (idx >= 0) & (idx < n_bins)
    counts = np.bincount(idx[in_range], minlength=n_bins)
    return IntervalHistogram(
        bin_width=bin_width,
        counts=counts,
        origin=origin,
        overflow=int(values.size - in_range.sum()),
    )


@dataclass(frozen=True)
class FitResult:
    """Fitted interval-model parameters with 1-sigma uncertainties.

    ``r_star`` is the combined a priori rate (efficiency-weighted photon
    rate plus dark rate); ``eta0`` is populated only when a calibrated
    photon rate was supplied to the fit.
    """

    r_star: float
    tau_d: float
    tau_r: float
    scale: float
    fixed: tuple[str, ...]
    uncertainties: dict[str, float]
    goodness: float
    iterations: int
    n_bins: int
    eta0: float | None = None

    def er_params(self) -> er.ErParams:
        if self.eta0 is None:
            raise ValueError("eta0 unknown: the fit was not given a calibrated photon rate")
        return er.ErParams(eta0=self.eta0, tau_d=self.tau_d, tau_r=self.tau_r)

    def to_dict(self) -> dict:
        return {
            "params": {
                "r_star": self.r_star,
                "tau_d": self.tau_d,
                "tau_r": self.tau_r,
                "scale": self.scale,
                "eta0": self.eta0,
            },
            "fixed": list(self.fixed),
            "uncertainties": dict(self.uncertainties),
            "goodness": self.goodness,
            "iterations": self.iterations,
            "n_bins": self.n_bins,
        }


def _default_init(hist: IntervalHistogram) -> dict[str, float]:
    """Starting values read off the histogram shape.

    Dead-time from the first populated bin, a priori rate from the mean
    interval beyond it, recovery constant from the peak position.
    """
    counts = hist.counts
    nonzero = np.nonzero(counts)[0]
    lefts = hist.bin_lefts
    tau_d0 = max(lefts[nonzero[0]] - hist.bin_width, hist.bin_width * 1e-3)
    mean_interval = float(np.average(hist.bin_centers, weights=counts))
    r_star0 = 1.0 / max(mean_interval - tau_d0, hist.bin_width * 1e-3)
    peak_center = hist.bin_centers[int(np.argmax(counts))]
    tau_r0 = max(peak_center - tau_d0, hist.bin_width)
    return {"r_star": r_star0, "tau_d": tau_d0, "tau_r": tau_r0, "scale": 1.0}


def _expected_counts(hist, theta: dict[str, float], simpson: bool):
    width = hist.bin_width
    params = er.ErParams(eta0=1.0, tau_d=theta["tau_d"], tau_r=theta["tau_r"])
    source = er.SourceParams(photon_rate=theta["r_star"])
    norm = theta["scale"] * hist.total * width
    if simpson:
        lefts = hist.bin_lefts
        f = (
            er.er_interval_pdf(lefts, params, source)
            + 4.0 * er.er_interval_pdf(lefts + 0.5 * width, params, source)
            + er.er_interval_pdf(lefts + width, params, source)
        ) / 6.0
        return norm * f
    return norm * er.er_interval_pdf(hist.bin_centers, params, source)


def _nll(counts, mu):
    mu_safe = np.maximum(mu, _MU_FLOOR)
    populated = counts > 0
    return float(mu.sum() - np.sum(counts[populated] * np.log(mu_safe[populated])))


def _deviance_residuals(counts, mu):
    mu_safe = np.maximum(mu, _MU_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(counts > 0, counts * np.log(counts / mu_safe), 0.0)
    dev = 2.0 * (term - (counts - mu))
    return np.sign(counts - mu) * np.sqrt(np.maximum(dev, 0.0))


def fit_er_histogram(
    hist: IntervalHistogram,
    init: dict[str, float] | None = None,
    fixed: dict[str, float] | tuple[str, ...] | list[str] = (),
    *,
    photon_rate: float | None = None,
    dark_apriori: float = 0.0,
    bin_mode: str = "auto",
    max_iterations: int = 500,
) -> FitResult:
    """Maximum-likelihood fit of the interval model to a histogram.

    ``fixed`` names parameters held at their init values (or, as a
    mapping, at the supplied values); everything else is free.  Internally
    free parameters are optimised in log space: a coarse grid over tau_r
    seeds a Nelder-Mead search, which a trust-region pass on the deviance
    residuals then polishes.  Uncertainties come from the inverse of the
    numerically evaluated observed-information matrix.
    """
    if hist.total < 1:
        raise DegenerateDataError("histogram is empty")
    if np.count_nonzero(hist.counts) < 2:
        raise DegenerateDataError("all counts fall in a single bin; model is unidentifiable")

    theta = _default_init(hist)
    if init:
        unknown = set(init) - set(_PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown init parameters: {sorted(unknown)}")
        theta.update(init)
    if isinstance(fixed, dict):
        unknown = set(fixed) - set(_PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
        theta.update(fixed)
        fixed_names = tuple(name for name in _PARAM_NAMES if name in fixed)
    else:
        fixed_names = tuple(name for name in _PARAM_NAMES if name in set(fixed))
    free_names = [name for name in _PARAM_NAMES if name not in fixed_names]
    if not free_names:
        raise ValueError("at least one parameter must be free")
    for name in _PARAM_NAMES:
        if theta[name] <= 0:
            raise ValueError(f"initial {name} must be positive, got {theta[name]}")

    simpson = bin_mode == "simpson" or (
        bin_mode == "auto" and hist.bin_width > theta["tau_r"] / 10.0
    )
    if bin_mode not in ("auto", "center", "simpson"):
        raise ValueError(f"unknown bin_mode {bin_mode!r}")

    counts = hist.counts.astype(float)

    def unpack(x):
        current = dict(theta)
        for name, value in zip(free_names, x):
            current[name] = float(np.exp(value))
        return current

    def nll_of(x):
        return _nll(counts, _expected_counts(hist, unpack(x), simpson))

    # Coarse grid over tau_r: the likelihood in tau_r is multimodal-prone
    # when the starting point sits far from the truth.
    if "tau_r" in free_names:
        base = dict(theta)
        best = (np.inf, theta["tau_r"])
        for factor in np.logspace(-1.5, 1.5, 13):
            base["tau_r"] = theta["tau_r"] * factor
            val = _nll(counts, _expected_counts(hist, base, simpson))
            if val < best[0]:
                best = (val, base["tau_r"])
        theta["tau_r"] = best[1]

    x0 = np.log([theta[name] for name in free_names])
    nm = optimize.minimize(
        nll_of,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": 1e-9,
            "fatol": 1e-9,
            "maxiter": max_iterations * len(free_names),
            "maxfev": 4 * max_iterations * len(free_names),
        },
    )

    def residuals_of(x):
        return _deviance_residuals(counts, _expected_counts(hist, unpack(x), simpson))

    polish = optimize.least_squares(
        residuals_of, nm.x, method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12,
        diff_step=1e-7,
    )
    x_best = polish.x if nll_of(polish.x) <= nm.fun else nm.x
    if not (nm.success or polish.success):
        raise FitError(
            "histogram fit did not converge",
            details={
                "nelder_mead": nm.message,
                "polish": polish.message,
                "params": unpack(x_best),
                "nll": nll_of(x_best),
            },
        )
    theta_best = unpack(x_best)

    # Observed information: central-difference Hessian of the NLL in log
    # space, transformed back through d(log p) = dp / p.
    uncertainties: dict[str, float] = {}
    n_free = len(free_names)
    step = 1e-4
    hess = np.empty((n_free, n_free))
    f0 = nll_of(x_best)
    for i in range(n_free):
        for j in range(i, n_free):
            ei = np.zeros(n_free); ei[i] = step
            ej = np.zeros(n_free); ej[j] = step
            if i == j:
                val = (nll_of(x_best + ei) - 2 * f0 + nll_of(x_best - ei)) / step**2
            else:
                val = (
                    nll_of(x_best + ei + ej)
                    - nll_of(x_best + ei - ej)
                    - nll_of(x_best - ei + ej)
                    + nll_of(x_best - ei - ej)
                ) / (4 * step**2)
            hess[i, j] = hess[j, i] = val
    try:
        cov = np.linalg.inv(hess)
        sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
        for name, sigma in zip(free_names, sigmas):
            uncertainties[name] = float(theta_best[name] * sigma)
    except np.linalg.LinAlgError:
        for name in free_names:
            uncertainties[name] = float("nan")

    mu = _expected_counts(hist, theta_best, simpson)
    deviance = float(np.sum(_deviance_residuals(counts, mu) ** 2))
    dof = max(hist.counts.size - n_free, 1)

    eta0 = None
    if photon_rate is not None and photon_rate > 0:
        eta0 = (theta_best["r_star"] - dark_apriori) / photon_rate

    return FitResult(
        r_star=theta_best["r_star"],
        tau_d=theta_best["tau_d"],
        tau_r=theta_best["tau_r"],
        scale=theta_best["scale"],
        fixed=fixed_names,
        uncertainties=uncertainties,
        goodness=deviance / dof,
        iterations=int(nm.nit) + int(polish.nfev),
        n_bins=hist.counts.size,
        eta0=eta0,
    )


@dataclass(frozen=True)
class InferredRate:
    """A-priori-rate report: photon-only rate after dark subtraction."""

    photon_apriori: float
    total_apriori: float
    measured: float
    model: str
    clipped: bool = False

    def rate_pair(self) -> nhpp.RatePair:
        return nhpp.RatePair(apriori=self.total_apriori, measured=self.measured)


_MODEL_ALIASES = {
    "simple": "simple",
    "er": "er",
    "approx_low": "approx_low",
    "low": "approx_low",
    "approx_high": "approx_high",
    "high": "approx_high",
}


def infer_apriori_rate(
    r_measured: float,
    params: er.ErParams,
    dark_apriori: float = 0.0,
    model: str = "er",
) -> InferredRate:
    """Invert the chosen rate equation and subtract the dark contribution.

    A negative photon rate after dark subtraction is clipped to zero and
    flagged rather than raised: it simply means the measurement is
    consistent with dark counts alone.
    """
    try:
        kind = _MODEL_ALIASES[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(set(_MODEL_ALIASES))}")
    if kind == "simple":
        total = nhpp.simple_rate_inverse(r_measured, params.tau_d)
    elif kind == "er":
        total = er.er_rate_inverse(r_measured, params)
    elif kind == "approx_low":
        total = er.approx_low_inverse(r_measured, params)
    else:
        total = er.approx_high_inverse(r_measured, params)
    photon = total - dark_apriori
    clipped = photon < 0
    return InferredRate(
        photon_apriori=max(photon, 0.0),
        total_apriori=float(total),
        measured=float(r_measured),
        model=kind,
        clipped=bool(clipped),
    )


def dark_count_rate_from_measurement(r_dark_measured: float, tau_d: float) -> float:
    """A priori dark-count rate from a dark-rate measurement (simple model)."""
    if r_dark_measured < 0:
        raise ValueError(f"measured dark rate must be non-negative, got {r_dark_measured}")
    if r_dark_measured == 0:
        return 0.0
    return nhpp.simple_rate_inverse(r_dark_measured, tau_d)
