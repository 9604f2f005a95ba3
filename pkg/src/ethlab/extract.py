"""Estimate energy-basis statistics of an operator: the smooth diagonal
profile, the squared envelope |f|^2(Ebar, w), and Gaussianity of the
normalized off-diagonal elements.

The envelope estimator inverts the matrix-element ansatz bin by bin:
|f|^2 in a (Ebar, w) bin is exp(S(Ebar)) times the mean |A_mn|^2 over the
bin, using off-diagonal pairs only. The decay rate per Ebar slice comes from
a count-weighted least-squares fit of log|f|^2 against |w|; since |f|^2
decays at twice the rate of f, the reported gamma is minus half that slope.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral import mean_level_spacing


@dataclass(frozen=True)
class DiagonalProfile:
    """Kernel-smoothed regression of A_nn against E_n, with local scatter."""

    energies: np.ndarray
    values: np.ndarray
    scatter: np.ndarray
    bandwidth: float

    def value_at(self, e):
        return np.interp(e, self.energies, self.values)


def diagonal_profile(a, spectrum, bandwidth=None, grid_points=201):
    """Nadaraya-Watson smoothing of the diagonal matrix elements.

    Bandwidth defaults to 2% of the spectral bandwidth and must be at least
    3 mean bulk level spacings, otherwise the regression just reproduces
    level-to-level scatter.
    """
    e = spectrum.eigenvalues
    diag = np.real(np.diagonal(a.matrix)).astype(float)
    span = spectrum.bandwidth
    if bandwidth is None:
        bandwidth = 0.02 * span
    bandwidth = float(bandwidth)
    spacing = mean_level_spacing(e)
    if bandwidth < 3 * spacing:
        raise ValidationError(
            f"bandwidth {bandwidth:g} below 3 mean level spacings ({3 * spacing:g})"
        )
    grid = np.linspace(e[0], e[-1], grid_points)
    values = np.empty_like(grid)
    scatter = np.empty_like(grid)
    for i, g in enumerate(grid):
        w = np.exp(-0.5 * ((e - g) / bandwidth) ** 2)
        total = w.sum()
        mean = np.dot(w, diag) / total
        var = np.dot(w, (diag - mean) ** 2) / total
        values[i] = mean
        scatter[i] = np.sqrt(max(var, 0.0))
    return DiagonalProfile(energies=grid, values=values, scatter=scatter,
                           bandwidth=bandwidth)


@dataclass(frozen=True)
class BinningSpec:
    """Binning and fit controls for the envelope estimator."""

    e_bins: int = 8
    omega_bins: int = 48
    min_count: int = 50
    fit_window: tuple = None   # (w_min, w_max); None = auto
    omega_max: float = None    # None = data maximum

    def __post_init__(self):
        if self.e_bins < 1 or self.omega_bins < 2:
            raise ValidationError("need e_bins >= 1 and omega_bins >= 2")
        if self.min_count < 1:
            raise ValidationError("min_count must be >= 1")


@dataclass(frozen=True)
class EnvelopeModel:
    """Binned |f|^2 over (Ebar, |w|) plus per-slice exponential decay fits.

    ``f2`` is NaN in bins dropped for low count. ``gamma`` is NaN for slices
    where fewer than 4 bins survive inside the fit window. ``density_boost``
    records exp(S(Ebar)) at each slice center, so downstream normalization
    can recover exp(S/2) without re-supplying the entropy model.
    """

    e_edges: np.ndarray
    omega_edges: np.ndarray
    f2: np.ndarray
    counts: np.ndarray
    density_boost: np.ndarray
    gamma: np.ndarray
    gamma_stderr: np.ndarray
    fit_residual: np.ndarray
    fit_window: tuple
    min_count: int

    @property
    def e_centers(self):
        return 0.5 * (self.e_edges[:-1] + self.e_edges[1:])

    @property
    def omega_centers(self):
        return 0.5 * (self.omega_edges[:-1] + self.omega_edges[1:])

    def f2_at(self, e_bar, omega):
        """Bin lookup; NaN where no estimate survived or outside the grid."""
        e_bar = np.asarray(e_bar, dtype=float)
        omega = np.abs(np.asarray(omega, dtype=float))
        i = np.digitize(e_bar, self.e_edges) - 1
        j = np.digitize(omega, self.omega_edges) - 1
        ne, nw = self.f2.shape
        ok = (i >= 0) & (i < ne) & (j >= 0) & (j < nw)
        out = np.full(np.broadcast(i, j).shape, np.nan)
        ii = np.clip(i, 0, ne - 1)
        jj = np.clip(j, 0, nw - 1)
        vals = self.f2[ii, jj]
        out[ok] = np.asarray(vals)[ok]
        return out

    def boost_at(self, e_bar):
        i = np.clip(np.digitize(np.asarray(e_bar, dtype=float), self.e_edges) - 1,
                    0, self.density_boost.size - 1)
        return self.density_boost[i]

    def gamma_at(self, e_bar):
        i = int(np.clip(np.digitize(e_bar, self.e_edges) - 1, 0, self.gamma.size - 1))
        return float(self.gamma[i])

    @property
    def central_gamma(self):
        """gamma of the available slice nearest the center of the binned range."""
        ok = np.where(np.isfinite(self.gamma))[0]
        if ok.size == 0:
            return float("nan")
        mid = 0.5 * (self.e_edges[0] + self.e_edges[-1])
        return float(self.gamma[ok[np.argmin(np.abs(self.e_centers[ok] - mid))]])

    def to_rows(self):
        """(e_center, omega_center, f2, count) rows for surviving bins."""
        rows = []
        for i, ec in enumerate(self.e_centers):
            for j, wc in enumerate(self.omega_centers):
                if np.isfinite(self.f2[i, j]):
                    rows.append((float(ec), float(wc), float(self.f2[i, j]),
                                 int(self.counts[i, j])))
        return rows


def _pair_bins(e, values_sq, e_edges, omega_edges, row_chunk=256):
    """Accumulate per-bin counts and |A|^2 sums over off-diagonal pairs."""
    ne, nw = len(e_edges) - 1, len(omega_edges) - 1
    counts = np.zeros((ne, nw), dtype=np.int64)
    sums = np.zeros((ne, nw), dtype=float)
    d = e.size
    for start in range(0, d, row_chunk):
        stop = min(start + row_chunk, d)
        eb = 0.5 * (e[start:stop, None] + e[None, :])
        om = np.abs(e[start:stop, None] - e[None, :])
        w = values_sq[start:stop, :].copy()
        rows = np.arange(start, stop)
        w[rows - start, rows] = 0.0
        ii = np.digitize(eb.ravel(), e_edges) - 1
        jj = np.digitize(om.ravel(), omega_edges) - 1
        ok = (ii >= 0) & (ii < ne) & (jj >= 0) & (jj < nw)
        mask = np.ones(eb.shape, dtype=bool)
        mask[rows - start, rows] = False  # keep the diagonal out of the counts
        ok &= mask.ravel()
        flat = ii[ok] * nw + jj[ok]
        counts += np.bincount(flat, minlength=ne * nw).reshape(ne, nw)
        sums += np.bincount(flat, weights=w.ravel()[ok],
                            minlength=ne * nw).reshape(ne, nw)
    return counts, sums


def envelope_estimate(a, spectrum, entropy, binning=None):
    """Binned |f|^2 estimate and per-slice decay-rate fits.

    Only m != n pairs enter. Bins with fewer than ``min_count`` pairs are
    dropped; slices with fewer than 4 surviving bins in the fit window get
    gamma = NaN. The default fit window starts at 4 mean bulk level spacings
    to keep the smallest, discreteness-dominated frequencies out of the fit.
    """
    if binning is None:
        binning = BinningSpec()
    e = spectrum.eigenvalues
    d = e.size
    if a.matrix.shape != (d, d):
        raise ValidationError("operator and spectrum dimensions differ")
    values_sq = np.abs(a.matrix) ** 2
    omega_max = binning.omega_max
    if omega_max is None:
        omega_max = float(e[-1] - e[0])
    e_edges = np.linspace(e[0], e[-1], binning.e_bins + 1)
    omega_edges = np.linspace(0.0, omega_max, binning.omega_bins + 1)
    counts, sums = _pair_bins(e, values_sq, e_edges, omega_edges)

    e_centers = 0.5 * (e_edges[:-1] + e_edges[1:])
    boost = np.exp(np.asarray(entropy.entropy_at(e_centers), dtype=float))
    f2 = np.full(counts.shape, np.nan)
    alive = counts >= binning.min_count
    f2[alive] = (sums[alive] / counts[alive]) * boost[np.nonzero(alive)[0]]

    spacing = mean_level_spacing(e)
    window = binning.fit_window
    if window is None:
        window = (4.0 * spacing, omega_max)
    w_centers = 0.5 * (omega_edges[:-1] + omega_edges[1:])
    in_window = (w_centers >= window[0]) & (w_centers <= window[1])

    ne = binning.e_bins
    gamma = np.full(ne, np.nan)
    stderr = np.full(ne, np.nan)
    residual = np.full(ne, np.nan)
    for i in range(ne):
        ok = alive[i] & in_window & (f2[i] > 0)
        if ok.sum() < 4:
            continue
        x = w_centers[ok]
        y = np.log(f2[i, ok])
        w = counts[i, ok].astype(float)
        slope, intercept, se = _weighted_line(x, y, w)
        gamma[i] = -0.5 * slope
        stderr[i] = 0.5 * se
        fitted = intercept + slope * x
        residual[i] = np.sqrt(np.average((y - fitted) ** 2, weights=w))
    return EnvelopeModel(e_edges=e_edges, omega_edges=omega_edges, f2=f2,
                         counts=counts, density_boost=boost, gamma=gamma,
                         gamma_stderr=stderr, fit_residual=residual,
                         fit_window=tuple(window), min_count=binning.min_count)


def _weighted_line(x, y, w):
    """Weighted least-squares line fit; returns slope, intercept, slope stderr."""
    wsum = w.sum()
    xm = np.dot(w, x) / wsum
    ym = np.dot(w, y) / wsum
    sxx = np.dot(w, (x - xm) ** 2)
    slope = np.dot(w, (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    n = x.size
    if n > 2:
        chi2 = np.dot(w, (y - intercept - slope * x) ** 2) / (n - 2)
        se = np.sqrt(chi2 / sxx)
    else:
        se = np.inf
    return slope, intercept, se


@dataclass(frozen=True)
class GaussianityStats:
    """Moments of normalized off-diagonal elements over a window.

    For complex operators the sample is the real and imaginary components
    scaled by sqrt(2) (unit variance each under the Hermitian-noise
    convention); essentially-real operators use the real parts directly.
    """

    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    sample_size: int
    low_power: bool


def gaussianity_stats(a, spectrum, envelope, window, low_power_threshold=1000):
    """Moments of R_hat = A_mn * exp(S/2) / f_hat over window pairs, m != n.

    exp(S/2) comes from the envelope's recorded density boost and
    f_hat = sqrt(|f|^2) from its bins, so an envelope estimated on an
    independent realization can be used to normalize this one. Pairs in
    bins without an estimate are excluded; raises when nothing survives.
    """
    idx = window.indices
    if idx.size < 2:
        raise ValidationError("window too small: no off-diagonal pairs")
    e = spectrum.eigenvalues[idx]
    sub = a.matrix[np.ix_(idx, idx)]
    iu = np.triu_indices(idx.size, 1)
    vals = sub[iu]
    ebar = 0.5 * (e[iu[0]] + e[iu[1]])
    omega = np.abs(e[iu[0]] - e[iu[1]])
    f2 = envelope.f2_at(ebar, omega)
    ok = np.isfinite(f2) & (f2 > 0)
    if not np.any(ok):
        raise ValidationError("no pairs with an available envelope estimate")
    amp = np.sqrt(envelope.boost_at(ebar[ok]))
    r_hat = vals[ok] * amp / np.sqrt(f2[ok])
    if np.abs(a.matrix.imag).max(initial=0.0) <= 1e-12 * np.abs(a.matrix).max(initial=1.0):
        sample = np.real(r_hat)
    else:
        sample = np.concatenate([np.real(r_hat), np.imag(r_hat)]) * np.sqrt(2.0)
    return _moments(sample, low_power_threshold)


def _moments(sample, low_power_threshold):
    n = sample.size
    mean = float(sample.mean())
    centered = sample - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    if m2 <= 0:
        raise ValidationError("degenerate sample: zero variance")
    return GaussianityStats(
        mean=mean,
        variance=m2,
        skewness=m3 / m2**1.5,
        excess_kurtosis=m4 / m2**2 - 3.0,
        sample_size=int(n),
        low_power=bool(n < low_power_threshold),
    )
