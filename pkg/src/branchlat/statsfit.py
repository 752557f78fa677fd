"""Histogramming and model fits: power law, Gaussian, size scaling.

Power-law fits are unweighted least squares on (log bin-center, log density);
the chi-square statistic is the sum of squared log-space residuals, which is
the only definition that stays tiny on a good log-log fit. Because the fitted
exponent drifts with the window, callers either pass an explicit window or
use the window scan to locate a regime empirically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import ConfigurationError

DEFAULT_LOG_BASE = 1.3


@dataclass
class Histogram:
    """Binned sample with normalized density: sum(density * width) == 1."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    scheme: str          # "linear" | "log"
    n_samples: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        """Geometric bin centers for the log scheme, arithmetic otherwise."""
        if self.scheme == "log":
            return np.sqrt(self.edges[:-1] * self.edges[1:])
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.counts > 0)


def histogram(samples, scheme: str = "linear", bins: int = 20,
              base: float = DEFAULT_LOG_BASE) -> Histogram:
    """Deterministic binning with normalized density.

    Linear binning uses `bins` equal-width bins over the sample range; log
    binning uses geometric edges base**k and requires positive samples.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ConfigurationError("histogram needs at least one sample")
    if scheme == "linear":
        if bins < 1:
            raise ConfigurationError(f"bins must be >= 1, got {bins}")
        lo, hi = samples.min(), samples.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    elif scheme == "log":
        if base <= 1.0:
            raise ConfigurationError(f"log base must exceed 1, got {base}")
        if samples.min() <= 0:
            raise ConfigurationError("log binning needs strictly positive samples")
        lo, hi = samples.min(), samples.max()
        k0 = int(np.floor(np.log(lo) / np.log(base)))
        edge_list = [base ** k0]
        while edge_list[-1] <= hi:
            edge_list.append(edge_list[-1] * base)
        edges = np.array(edge_list)
    else:
        raise ConfigurationError(f"unknown binning scheme {scheme!r}")
    counts, _ = np.histogram(samples, bins=edges)
    widths = np.diff(edges)
    density = counts / (samples.size * widths)
    return Histogram(edges=edges, counts=counts, density=density,
                     scheme=scheme, n_samples=samples.size)


@dataclass
class PowerLawFit:
    """P(t) ~ amplitude * t^-alpha over [t_min, t_max]."""

    alpha: float
    amplitude: float
    chi2: float              # sum of squared log-density residuals
    window: tuple[float, float]
    n_points: int

    @property
    def chi2_reduced(self) -> float:
        return self.chi2 / max(self.n_points - 2, 1)


def _fit_loglog(log_x: np.ndarray, log_y: np.ndarray) -> tuple[float, float, float]:
    A = np.vstack([log_x, np.ones_like(log_x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, log_y, rcond=None)
    resid = log_y - (slope * log_x + intercept)
    return float(slope), float(intercept), float((resid ** 2).sum())


def fit_power_law(hist: Histogram, window: tuple[float, float],
                  min_bins: int = 3) -> PowerLawFit:
    """Least-squares power law over the nonempty bins inside the window."""
    lo, hi = window
    centers = hist.centers
    mask = (hist.counts > 0) & (centers >= lo) & (centers <= hi)
    if mask.sum() < min_bins:
        raise ConfigurationError(
            f"window [{lo}, {hi}] covers {int(mask.sum())} nonempty bins, "
            f"need at least {min_bins}")
    if np.any(centers[mask] <= 0):
        raise ConfigurationError("power-law fits need positive bin centers")
    slope, intercept, chi2 = _fit_loglog(np.log(centers[mask]),
                                         np.log(hist.density[mask]))
    return PowerLawFit(alpha=-slope, amplitude=float(np.exp(intercept)),
                       chi2=chi2, window=(float(lo), float(hi)),
                       n_points=int(mask.sum()))


@dataclass
class WindowFit:
    """One entry of a window scan: bin span plus the fit over it."""

    start_bin: int
    end_bin: int           # exclusive, indexes into the nonempty-bin list
    t_lo: float
    t_hi: float
    fit: PowerLawFit


def scan_power_law(hist: Histogram, min_bins: int = 5) -> list[WindowFit]:
    """All contiguous windows of >= min_bins nonempty bins, each fitted."""
    idx = hist.nonempty()
    centers, density = hist.centers, hist.density
    out: list[WindowFit] = []
    for i in range(len(idx)):
        for j in range(i + min_bins, len(idx) + 1):
            sel = idx[i:j]
            slope, intercept, chi2 = _fit_loglog(np.log(centers[sel]),
                                                 np.log(density[sel]))
            fit = PowerLawFit(alpha=-slope, amplitude=float(np.exp(intercept)),
                              chi2=chi2,
                              window=(float(centers[sel[0]]), float(centers[sel[-1]])),
                              n_points=len(sel))
            out.append(WindowFit(start_bin=i, end_bin=j,
                                 t_lo=fit.window[0], t_hi=fit.window[1], fit=fit))
    return out


def small_t_fits(hist: Histogram, min_bins: int = 3, max_bins: int = 6,
                 anchors: tuple[int, ...] = (0, 1)) -> list[WindowFit]:
    """Candidate small-t regime fits: windows anchored at the first bins.

    The exponent drifts with the window, so the small-t regime is located by
    fitting every window that starts at one of the first nonempty bins and
    spans min_bins..max_bins of them.
    """
    idx = hist.nonempty()
    out: list[WindowFit] = []
    for a in anchors:
        for ln in range(min_bins, max_bins + 1):
            if a + ln > len(idx):
                continue
            sel = idx[a:a + ln]
            slope, intercept, chi2 = _fit_loglog(np.log(hist.centers[sel]),
                                                 np.log(hist.density[sel]))
            fit = PowerLawFit(alpha=-slope, amplitude=float(np.exp(intercept)),
                              chi2=chi2,
                              window=(float(hist.centers[sel[0]]),
                                      float(hist.centers[sel[-1]])),
                              n_points=len(sel))
            out.append(WindowFit(start_bin=a, end_bin=a + ln,
                                 t_lo=fit.window[0], t_hi=fit.window[1], fit=fit))
    return out


def best_scan_chi2(samples, base: float = DEFAULT_LOG_BASE,
                   min_bins: int = 5) -> Optional[float]:
    """Smallest reduced chi2 over the full window scan, None if no window fits."""
    hist = histogram(samples, scheme="log", base=base)
    fits = scan_power_law(hist, min_bins=min_bins)
    if not fits:
        return None
    return min(w.fit.chi2_reduced for w in fits)


def has_power_law_regime(samples, threshold: float, base: float = DEFAULT_LOG_BASE,
                         min_bins: int = 5) -> bool:
    """Whether any >= min_bins window fits better than the threshold.

    The threshold is calibrated on a distribution known to carry a power-law
    regime at the same sample size and binning.
    """
    best = best_scan_chi2(samples, base=base, min_bins=min_bins)
    return best is not None and best <= threshold


@dataclass
class GaussianFit:
    """Moment estimates plus shape diagnostics against the fitted normal."""

    mean: float
    sd: float
    chi2_reduced: float
    skewness: float
    excess_kurtosis: float
    n_modes: int
    n_samples: int

    def is_gaussian_like(self, max_skew: float = 0.5, max_chi2: float = 5.0) -> bool:
        """Operational bell-shape check: unimodal, roughly symmetric, good fit."""
        return (self.n_modes == 1 and abs(self.skewness) < max_skew
                and self.chi2_reduced < max_chi2)


def count_modes(counts: np.ndarray, valley_frac: float = 0.75,
                floor_frac: float = 0.1) -> int:
    """Distinct peaks of a histogram.

    Candidate peaks are plateau-aware local maxima above floor_frac of the
    global maximum; two candidates count as separate modes only when the
    valley between them dips below valley_frac of the smaller peak. Long
    histograms are lightly smoothed first to suppress Poisson noise.
    """
    c = np.asarray(counts, dtype=float)
    if c.size == 0 or c.max() <= 0:
        return 0
    if c.size >= 9:
        c = np.convolve(c, np.ones(3) / 3, mode="same")
    floor = floor_frac * c.max()
    candidates = []
    i = 0
    while i < len(c):
        j = i
        while j + 1 < len(c) and c[j + 1] == c[i]:
            j += 1
        left = c[i - 1] if i > 0 else -np.inf
        right = c[j + 1] if j + 1 < len(c) else -np.inf
        if c[i] > floor and c[i] >= left and c[i] >= right and \
                (c[i] > left or c[i] > right):
            candidates.append(i)
        i = j + 1
    modes = 0
    last = None
    for m in candidates:
        if last is None:
            modes += 1
            last = m
            continue
        valley = c[last:m + 1].min()
        if valley < valley_frac * min(c[last], c[m]):
            modes += 1
            last = m
        elif c[m] > c[last]:
            last = m
    return modes


def fit_gaussian(samples, bins: Optional[int] = None) -> GaussianFit:
    """Moment fit with a Pearson chi-square against the fitted normal."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 8:
        raise ConfigurationError(f"need at least 8 samples, got {n}")
    mean = float(samples.mean())
    sd = float(samples.std(ddof=1))
    if sd == 0:
        raise ConfigurationError("degenerate sample: all values equal")
    m2 = ((samples - mean) ** 2).mean()
    m3 = ((samples - mean) ** 3).mean()
    m4 = ((samples - mean) ** 4).mean()
    skew = float(m3 / m2 ** 1.5)
    kurt = float(m4 / m2 ** 2 - 3.0)

    if bins is None:
        bins = max(8, int(round(np.sqrt(n))))
    hist = histogram(samples, scheme="linear", bins=bins)
    centers, widths = hist.centers, hist.widths
    expected = n * widths * np.exp(-0.5 * ((centers - mean) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
    use = expected >= 5.0
    if use.sum() >= 4:
        chi2 = float((((hist.counts[use] - expected[use]) ** 2) / expected[use]).sum())
        dof = max(int(use.sum()) - 3, 1)
    else:
        chi2 = float((((hist.counts - expected) ** 2) / np.maximum(expected, 1.0)).sum())
        dof = max(len(centers) - 3, 1)
    return GaussianFit(mean=mean, sd=sd, chi2_reduced=chi2 / dof,
                       skewness=skew, excess_kurtosis=kurt,
                       n_modes=count_modes(hist.counts), n_samples=n)


@dataclass
class SizeScalingFit:
    """dS1 ~ L^-phi from least squares on (log L, log dS1)."""

    phi: float
    amplitude: float
    stderr: float
    chi2: float
    n_points: int

    @property
    def weakly_discontinuous(self) -> bool:
        """Jumps that shrink with size (phi > 0) mark a weak discontinuity."""
        return self.phi > 0


def fit_size_scaling(points) -> SizeScalingFit:
    """Fit the size-scaling exponent from (L, dS1) pairs, all positive."""
    pts = [(float(L), float(v)) for L, v in points]
    if len(pts) < 3:
        raise ConfigurationError(f"need at least 3 sizes, got {len(pts)}")
    if any(L <= 0 or v <= 0 for L, v in pts):
        raise ConfigurationError("size-scaling fit needs positive sizes and jumps")
    x = np.log([L for L, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept, chi2 = _fit_loglog(x, y)
    n = len(pts)
    sxx = ((x - x.mean()) ** 2).sum()
    stderr = float(np.sqrt(chi2 / (n - 2) / sxx)) if n > 2 and sxx > 0 else 0.0
    return SizeScalingFit(phi=-slope, amplitude=float(np.exp(intercept)),
                          stderr=stderr, chi2=chi2, n_points=n)
