"""Dense exact diagonalization, smoothed entropy models, and energy windows.

All estimators downstream work in the energy eigenbasis, so this module owns
the two objects everything else consumes: the sorted spectrum with its
eigenvector matrix, and a smooth entropy model S(E) built by Gaussian-kernel
smoothing of the level density (the level count per unit energy), with
beta(E) = S'(E) obtained by centered finite differences.

Storage is dense only; dimensions are capped at 2**13 because every formula
in the package needs the full eigenbasis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindowError, NumericError, SizeError, ValidationError

MAX_DENSE_DIM = 1 << 13
HERMITICITY_RTOL = 1e-12


def require_hermitian(h, rtol=HERMITICITY_RTOL, name="matrix"):
    """Validate that ``h`` is square and Hermitian to relative Frobenius tolerance."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {h.shape}")
    norm = np.linalg.norm(h)
    dev = np.linalg.norm(h - h.conj().T)
    if norm > 0 and dev > rtol * norm:
        raise ValidationError(
            f"{name} is not Hermitian: relative deviation {dev / norm:.3e}"
        )
    return h


@dataclass(frozen=True)
class EnergySpectrum:
    """Sorted eigenvalues and eigenbasis of a Hermitian matrix.

    ``basis`` holds column eigenvectors; ``None`` means the identity basis,
    used by synthetic spectra that are generated directly in their own
    eigenbasis (this avoids materializing large identity matrices).
    """

    eigenvalues: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.eigenvalues, dtype=float)
        if e.ndim != 1 or e.size < 1:
            raise ValidationError("eigenvalues must be a nonempty 1-D array")
        if np.any(np.diff(e) < 0):
            raise ValidationError("eigenvalues must be ascending")
        object.__setattr__(self, "eigenvalues", e)
        if self.basis is not None:
            b = np.asarray(self.basis)
            if b.shape != (e.size, e.size):
                raise ValidationError("basis shape does not match eigenvalue count")
            object.__setattr__(self, "basis", b)

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def bandwidth(self):
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def basis_matrix(self):
        """Return the eigenvector matrix, materializing the identity if needed."""
        if self.basis is None:
            return np.eye(self.dim)
        return self.basis


def eigendecompose(h):
    """Diagonalize a Hermitian matrix into an :class:`EnergySpectrum`.

    Real-symmetric input takes the real LAPACK path, so the returned basis is
    real in that case. Eigenvalues come back sorted ascending; within
    degenerate subspaces the basis is an arbitrary orthonormal choice.
    """
    h = require_hermitian(h, name="hamiltonian")
    if h.shape[0] > MAX_DENSE_DIM:
        raise SizeError(
            f"dimension {h.shape[0]} exceeds dense cap {MAX_DENSE_DIM}"
        )
    if np.iscomplexobj(h) and np.abs(h.imag).max(initial=0.0) == 0.0:
        h = h.real
    try:
        eigenvalues, basis = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return EnergySpectrum(eigenvalues=eigenvalues, basis=basis)


@dataclass(frozen=True)
class OperatorEigenbasis:
    """Matrix elements A_mn of an observable in an energy eigenbasis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("operator matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def is_hermitian(self, rtol=1e-10):
        norm = np.linalg.norm(self.matrix)
        if norm == 0:
            return True
        return np.linalg.norm(self.matrix - self.matrix.conj().T) <= rtol * norm * 2


def mean_level_spacing(eigenvalues, bulk_fraction=0.6):
    """Mean spacing over the central ``bulk_fraction`` of the sorted spectrum."""
    e = np.asarray(eigenvalues, dtype=float)
    if e.size < 2:
        raise ValidationError("need at least two levels for a spacing")
    n = e.size
    lo = int(round(n * (1 - bulk_fraction) / 2))
    hi = max(lo + 2, n - lo)
    spacings = np.diff(e[lo:hi])
    if spacings.size == 0:
        spacings = np.diff(e)
    return float(spacings.mean())


def spacing_ratio_mean(eigenvalues, bulk_fraction=0.5):
    """Mean consecutive-spacing ratio <r> over the central bulk.

    r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1}) for consecutive spacings s_n.
    Chaotic (GOE) spectra give <r> near 0.5307; uncorrelated (Poisson)
    spectra give about 0.386.
    """
    e = np.sort(np.asarray(eigenvalues, dtype=float))
    n = e.size
    lo = int(round(n * (1 - bulk_fraction) / 2))
    hi = max(lo + 3, n - lo)
    s = np.diff(e[lo:hi])
    if s.size < 2:
        raise ValidationError("not enough bulk levels for spacing ratios")
    pairs = np.stack([s[:-1], s[1:]])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = pairs.min(axis=0) / pairs.max(axis=0)
    r = r[np.isfinite(r)]
    return float(r.mean())


@dataclass(frozen=True)
class EntropyModel:
    """Smooth S(E) and beta(E) = S'(E) on an energy grid.

    ``exp(S(E))`` approximates the level density per unit energy at kernel
    bandwidth ``sigma_s``. Evaluation between grid points is linear
    interpolation; outside the grid the edge value is used.
    """

    sigma_s: float
    grid_energies: np.ndarray
    grid_entropy: np.ndarray
    grid_beta: np.ndarray

    def entropy_at(self, e):
        return np.interp(e, self.grid_energies, self.grid_entropy)

    def beta_at(self, e):
        return np.interp(e, self.grid_energies, self.grid_beta)

    def density_at(self, e):
        return np.exp(self.entropy_at(e))

    @classmethod
    def from_function(cls, fn, e_min, e_max, grid_points=513, sigma_s=0.0):
        """Build a model from an analytic S(E) callable (synthetic control)."""
        grid = np.linspace(float(e_min), float(e_max), grid_points)
        s = np.asarray(fn(grid), dtype=float)
        if s.shape != grid.shape:
            s = np.full_like(grid, float(fn(grid[0])))
        beta = np.gradient(s, grid)
        return cls(sigma_s=float(sigma_s), grid_energies=grid,
                   grid_entropy=s, grid_beta=beta)

    @classmethod
    def constant(cls, value, e_min, e_max):
        """Energy-independent entropy, e.g. S = log(D) for flat synthetic models."""
        return cls.from_function(lambda e: np.full_like(e, float(value)),
                                 e_min, e_max, grid_points=17)


def entropy_model(spectrum, sigma_s=None, grid_points=2049):
    """Gaussian-kernel entropy model from a finite spectrum.

    exp(S(E)) is the kernel-smoothed level density
    sum_n N(E; E_n, sigma_s**2), and beta(E) comes from centered finite
    differences of S on the grid. The default bandwidth is 2% of the
    spectral bandwidth; bandwidths below 3 mean bulk level spacings are
    rejected because the estimate would resolve level discreteness.
    """
    e = spectrum.eigenvalues
    span = spectrum.bandwidth
    if span <= 0:
        raise ValidationError("spectrum has zero bandwidth")
    if sigma_s is None:
        sigma_s = 0.02 * span
    sigma_s = float(sigma_s)
    spacing = mean_level_spacing(e)
    if sigma_s < 3 * spacing:
        raise ValidationError(
            f"sigma_s={sigma_s:g} below 3 mean bulk level spacings ({3 * spacing:g})"
        )
    pad = 2 * sigma_s
    grid = np.linspace(e[0] - pad, e[-1] + pad, grid_points)
    norm = 1.0 / (np.sqrt(2 * np.pi) * sigma_s)
    density = np.zeros_like(grid)
    chunk = max(1, int(2**22 // max(grid.size, 1)))
    for start in range(0, e.size, chunk):
        block = e[start:start + chunk]
        z = (grid[:, None] - block[None, :]) / sigma_s
        density += norm * np.exp(-0.5 * z * z).sum(axis=1)
    density = np.maximum(density, 1e-300)
    s = np.log(density)
    beta = np.gradient(s, grid)
    return EntropyModel(sigma_s=sigma_s, grid_energies=grid,
                        grid_entropy=s, grid_beta=beta)


@dataclass(frozen=True)
class MicrocanonicalWindow:
    """Contiguous index range of eigenstates inside [center - hw, center + hw]."""

    center: float
    half_width: float
    start: int
    stop: int

    @property
    def size(self):
        return self.stop - self.start

    @property
    def indices(self):
        return np.arange(self.start, self.stop)

    def member_energies(self, spectrum):
        return spectrum.eigenvalues[self.start:self.stop]


def microcanonical_window(spectrum, center, half_width):
    """Maximal contiguous index range with eigenvalues inside the window.

    Raises :class:`EmptyWindowError` when no eigenvalue falls inside, so
    callers cannot silently carry on with an empty shell.
    """
    if half_width <= 0:
        raise ValidationError("half_width must be positive")
    e = spectrum.eigenvalues
    start = int(np.searchsorted(e, center - half_width, side="left"))
    stop = int(np.searchsorted(e, center + half_width, side="right"))
    if stop <= start:
        raise EmptyWindowError(
            f"no eigenvalues in [{center - half_width:g}, {center + half_width:g}]"
        )
    return MicrocanonicalWindow(center=float(center), half_width=float(half_width),
                                start=start, stop=stop)
