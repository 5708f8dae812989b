"""Periodic box, spectral transforms and differential operators.

The physical problem lives on R^3; everything here works on the torus
[0, 2pi)^3. Coefficients are normalized so that the k=0 coefficient is the
mean of the samples, i.e. f(x) = sum_k c_k exp(i k.x).
"""
import logging
import os
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from scipy import fft

from mpdns.errors import ConfigError

log = logging.getLogger(__name__)

MIN_POINTS = 8
AXES = (-3, -2, -1)


def fft_workers() -> int:
    """Thread budget from MPDNS_THREADS.

    Transforms use the scipy.fft default, which the commands set with
    ``scipy.fft.set_workers``; the setting is per thread.
    """
    value = os.environ.get("MPDNS_THREADS", "1")
    try:
        workers = int(value)
    except ValueError:
        log.warning(f"Ignoring invalid MPDNS_THREADS={value!r}.")
        return 1
    return max(1, workers)


def split_workers(total: int, tasks: int) -> Tuple[int, int]:
    """Share ``total`` threads between concurrent tasks and the FFTs inside each."""
    pool = max(1, min(total, tasks))
    return pool, max(1, total // pool)


class Grid:
    """Uniform periodic grid with n points per axis on a box of side 2pi."""
    def __init__(self, n: int):
        self.n = n
        self.box_length = 2 * np.pi
        self.spacing = self.box_length / n
        self.shape = (n, n, n)
        self.volume = self.box_length ** 3

        # fft ordering, with the Nyquist frequency stored as +n/2
        k = np.rint(fft.fftfreq(n, 1.0 / n)).astype(int)
        k[n // 2] = n // 2
        self.wavenumbers = k
        self.dealias_cutoff = n // 3

        full = [k.astype(float).reshape(_axis_shape(a)) for a in range(3)]
        self.k_sq = full[0] ** 2 + full[1] ** 2 + full[2] ** 2
        self.k_mag = np.sqrt(self.k_sq)

        # odd derivatives drop the Nyquist mode to keep fields real
        k_odd = k.astype(float)
        k_odd[n // 2] = 0.0
        self.k = tuple(k_odd.reshape(_axis_shape(a)) for a in range(3))
        self.k_odd_sq = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        # 1/|k|^2 with the k=0 entry set to zero
        self.k_odd_sq_inv = np.divide(1.0, self.k_odd_sq, out=np.zeros_like(self.k_odd_sq),
                                      where=self.k_odd_sq > 0)

        retained = np.abs(k) <= self.dealias_cutoff
        self.dealias_mask = (retained.reshape(_axis_shape(0))
                             & retained.reshape(_axis_shape(1))
                             & retained.reshape(_axis_shape(2)))

        # real-transform half lattice: k3 = 0..n/2 only
        h = n // 2 + 1
        self.half_shape = (n, n, h)
        self.k_half = (self.k[0], self.k[1], self.k[2][..., :h])
        self.k_sq_half = self.k_sq[..., :h]
        self.k_odd_sq_inv_half = self.k_odd_sq_inv[..., :h]
        self.dealias_mask_half = self.dealias_mask[..., :h]
        # modes with 0 < k3 < n/2 stand for their conjugate partner too
        weight = np.full(h, 2.0)
        weight[0] = weight[-1] = 1.0
        self.half_weight = weight.reshape(_axis_shape(2))

    def __repr__(self):
        return f"Grid(n={self.n})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def wavenumber_of(self, index: int) -> int:
        return int(self.wavenumbers[index % self.n])

    def index_of(self, wavenumber: int) -> int:
        return int(wavenumber) % self.n

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates x1, x2, x3."""
        x = np.arange(self.n) * self.spacing
        return tuple(x.reshape(_axis_shape(a)) for a in range(3))


def _axis_shape(axis: int) -> Tuple[int, int, int]:
    shape = [1, 1, 1]
    shape[axis] = -1
    return tuple(shape)


@lru_cache(maxsize=None)
def make_grid(n: int) -> Grid:
    """Create (or reuse) the grid with n points per axis."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ConfigError(f"grid size must be an integer, got {n!r}")
    if n < MIN_POINTS or n & (n - 1):
        raise ConfigError(f"grid size must be a power of two >= {MIN_POINTS}, got {n}")
    grid = Grid(int(n))
    log.info(f"Created {grid} with dealias cutoff {grid.dealias_cutoff}.")
    return grid


class SpectralScalarField:
    """Fourier coefficients of a real scalar field. Treated as immutable."""
    ncomp = 1

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match {grid}")
        coeffs.flags.writeable = False
        self.grid = grid
        self.coeffs = coeffs

    def _new(self, coeffs):
        return SpectralScalarField(self.grid, coeffs)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self._new(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self._new(self.coeffs - other.coeffs)

    def __mul__(self, c):
        return self._new(self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs)

    def mean(self) -> float:
        return float(self.coeffs[0, 0, 0].real)

    def __repr__(self):
        return f"SpectralScalarField({self.grid})"


class SpectralVectorField:
    """Three spectral components on one grid, stored as a (3, n, n, n) array."""
    ncomp = 3

    def __init__(self, grid: Grid, coeffs: np.ndarray, solenoidal: bool = False):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != (3,) + grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match {grid}")
        coeffs.flags.writeable = False
        self.grid = grid
        self.coeffs = coeffs
        self.solenoidal = solenoidal

    @classmethod
    def from_components(cls, components, solenoidal=False):
        components = list(components)
        if len(components) != 3:
            raise ValueError("a vector field needs exactly three components")
        grid = components[0].grid
        for c in components[1:]:
            _check_same_grid(components[0], c)
        return cls(grid, np.stack([c.coeffs for c in components]), solenoidal=solenoidal)

    @property
    def components(self) -> Tuple[SpectralScalarField, ...]:
        return tuple(SpectralScalarField(self.grid, c) for c in self.coeffs)

    def _new(self, coeffs, solenoidal=False):
        return SpectralVectorField(self.grid, coeffs, solenoidal=solenoidal)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self._new(self.coeffs + other.coeffs, self.solenoidal and other.solenoidal)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self._new(self.coeffs - other.coeffs, self.solenoidal and other.solenoidal)

    def __mul__(self, c):
        return self._new(self.coeffs * c, self.solenoidal)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs, self.solenoidal)

    def __repr__(self):
        return f"SpectralVectorField({self.grid}, solenoidal={self.solenoidal})"


Field = Union[SpectralScalarField, SpectralVectorField]


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError(f"fields live on different grids: {a.grid} and {b.grid}")


def _like(f: Field, coeffs: np.ndarray) -> Field:
    if coeffs.ndim == 3:
        return SpectralScalarField(f.grid, coeffs)
    return SpectralVectorField(f.grid, coeffs)


def forward(samples: np.ndarray) -> np.ndarray:
    """Raw transform of real samples over the last three axes."""
    return fft.fftn(samples, axes=AXES, norm="forward")


def inverse(coeffs: np.ndarray) -> np.ndarray:
    """Raw inverse transform over the last three axes, real part."""
    return fft.ifftn(coeffs, axes=AXES, norm="forward").real


def forward_half(samples: np.ndarray) -> np.ndarray:
    """Real transform onto the half lattice k3 >= 0."""
    return fft.rfftn(samples, axes=AXES, norm="forward")


def inverse_half(coeffs: np.ndarray, n: int) -> np.ndarray:
    return fft.irfftn(coeffs, s=(n, n, n), axes=AXES, norm="forward")


def to_half(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    return np.ascontiguousarray(coeffs[..., :n // 2 + 1])


def from_half(half: np.ndarray) -> np.ndarray:
    """Full coefficient array from the half lattice, using c(-k) = conj(c(k))."""
    n = half.shape[-2]
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., :n // 2 + 1] = half
    neg = (-np.arange(n)) % n
    mirrored = np.take(np.take(half[..., n // 2 - 1:0:-1], neg, axis=-3), neg, axis=-2)
    full[..., n // 2 + 1:] = np.conj(mirrored)
    return full


def half_inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """L^2 inner product of two real fields given on the half lattice."""
    return float(grid.volume * np.sum(grid.half_weight * (a * np.conj(b)).real))


def to_spectral(samples: np.ndarray, grid: Optional[Grid] = None) -> Field:
    """Transform real samples of shape (n,n,n) or (3,n,n,n) into a spectral field."""
    samples = np.asarray(samples, dtype=float)
    if grid is None:
        grid = make_grid(samples.shape[-1])
    if samples.shape == grid.shape:
        return SpectralScalarField(grid, forward(samples))
    if samples.shape == (3,) + grid.shape:
        return SpectralVectorField(grid, forward(samples))
    raise ValueError(f"sample shape {samples.shape} does not match {grid}")


def to_physical(f: Field) -> np.ndarray:
    return inverse(f.coeffs)


def dealias(f: Field) -> Field:
    return _like(f, f.coeffs * f.grid.dealias_mask)


def partial_derivative(f: Field, axis: int) -> Field:
    """Spectral derivative along axis 1, 2 or 3."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    return _like(f, 1j * f.grid.k[axis - 1] * f.coeffs)


def gradient(f: SpectralScalarField) -> SpectralVectorField:
    k = f.grid.k
    return SpectralVectorField(f.grid, np.stack([1j * k[a] * f.coeffs for a in range(3)]))


def _wavenumbers(grid: Grid, half: bool):
    return grid.k_half if half else grid.k


def curl_coeffs(v: np.ndarray, grid: Grid, half: bool = False) -> np.ndarray:
    k1, k2, k3 = _wavenumbers(grid, half)
    return 1j * np.stack([
        k2 * v[2] - k3 * v[1],
        k3 * v[0] - k1 * v[2],
        k1 * v[1] - k2 * v[0],
    ])


def divergence_coeffs(v: np.ndarray, grid: Grid, half: bool = False) -> np.ndarray:
    k1, k2, k3 = _wavenumbers(grid, half)
    return 1j * (k1 * v[0] + k2 * v[1] + k3 * v[2])


def grad_div_coeffs(v: np.ndarray, grid: Grid, half: bool = False) -> np.ndarray:
    div = divergence_coeffs(v, grid, half)
    return np.stack([1j * k * div for k in _wavenumbers(grid, half)])


def leray_coeffs(v: np.ndarray, grid: Grid, half: bool = False) -> np.ndarray:
    """Apply P = I - k k^T / |k|^2 mode by mode; modes with k=0 pass through."""
    k = _wavenumbers(grid, half)
    inv_k_sq = grid.k_odd_sq_inv_half if half else grid.k_odd_sq_inv
    k_dot_v = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) * inv_k_sq
    return np.stack([v[a] - k[a] * k_dot_v for a in range(3)])


def curl(v: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField(v.grid, curl_coeffs(v.coeffs, v.grid), solenoidal=True)


def divergence(v: SpectralVectorField) -> SpectralScalarField:
    return SpectralScalarField(v.grid, divergence_coeffs(v.coeffs, v.grid))


def laplacian(f: Field) -> Field:
    out = _like(f, -f.grid.k_sq * f.coeffs)
    if isinstance(f, SpectralVectorField):
        out.solenoidal = f.solenoidal
    return out


def grad_div(v: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField(v.grid, grad_div_coeffs(v.coeffs, v.grid))


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField(v.grid, leray_coeffs(v.coeffs, v.grid), solenoidal=True)


def divergence_ratio(v: SpectralVectorField) -> float:
    """max_k |k.c(k)| relative to max_k |c(k)|."""
    scale = np.abs(v.coeffs).max()
    if scale == 0:
        return 0.0
    return float(np.abs(divergence_coeffs(v.coeffs, v.grid)).max() / scale)


def is_solenoidal(v: SpectralVectorField, tol: float = 1e-10) -> bool:
    return divergence_ratio(v) <= tol


def hermitian_error(f: Field) -> float:
    """Largest |c(-k) - conj(c(k))| relative to the largest coefficient."""
    c = f.coeffs
    scale = np.abs(c).max()
    if scale == 0:
        return 0.0
    flipped = np.roll(np.flip(c, axis=AXES), 1, axis=AXES)
    return float(np.abs(flipped - np.conj(c)).max() / scale)


def inner_product(f: Field, g: Field) -> float:
    """L^2 inner product over the box, evaluated through Parseval."""
    _check_same_grid(f, g)
    return float(f.grid.volume * np.sum(f.coeffs * np.conj(g.coeffs)).real)


def l2_norm_sq(f: Field) -> float:
    return float(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2))


def gradient_norm_sq(f: Field) -> float:
    """||grad f||^2 summed over components."""
    return float(f.grid.volume * np.sum(f.grid.k_sq * np.abs(f.coeffs) ** 2))


def laplacian_norm_sq(f: Field) -> float:
    return float(f.grid.volume * np.sum(f.grid.k_sq ** 2 * np.abs(f.coeffs) ** 2))


def lp_norm(f: Field, p: float) -> float:
    """Rectangle-rule L^p norm of |f| over the box; p=inf is the grid maximum."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    values = to_physical(f)
    if values.ndim == 4:
        values = np.sqrt(np.sum(values ** 2, axis=0))
    else:
        values = np.abs(values)
    peak = values.max()
    if np.isinf(p) or peak == 0:
        return float(peak)
    # scaled by the peak so large p neither underflows nor overflows
    cell = f.grid.spacing ** 3
    return float(peak * (cell * np.sum((values / peak) ** p)) ** (1.0 / p))


def random_coefficients(grid: Grid, rng: np.random.Generator, kmax: float, exponent: float,
                        shell: bool = False) -> np.ndarray:
    """Hermitian random coefficients with |c(k)| = |k|^exponent for 0 < |k| <= kmax.

    Phases are drawn on a compact (2m+1)^3 lattice, m = floor(kmax), and then
    placed into the grid, so one generator state gives the same band-limited
    function on every grid that resolves it. With ``shell`` only the modes with
    kmax-1 < |k| <= kmax are kept, all with unit magnitude.
    """
    m = int(np.floor(kmax))
    if m > grid.n // 2 - 1:
        raise ValueError(f"kmax={kmax} is not representable on {grid}")
    offsets = np.arange(-m, m + 1)
    kk = [offsets.reshape(_axis_shape(a)).astype(float) for a in range(3)]
    k_mag = np.sqrt(kk[0] ** 2 + kk[1] ** 2 + kk[2] ** 2)

    theta = rng.uniform(0.0, 2 * np.pi, size=(2 * m + 1,) * 3)
    # antisymmetric phase makes c(-k) = conj(c(k))
    theta = 0.5 * (theta - theta[::-1, ::-1, ::-1])

    if shell:
        keep = (k_mag > kmax - 1) & (k_mag <= kmax)
        magnitude = keep.astype(float)
    else:
        keep = (k_mag > 0) & (k_mag <= kmax)
        magnitude = np.where(keep, np.where(keep, k_mag, 1.0) ** exponent, 0.0)

    coeffs = np.zeros(grid.shape, dtype=complex)
    idx = offsets % grid.n
    coeffs[np.ix_(idx, idx, idx)] = magnitude * np.exp(1j * theta)
    return coeffs
