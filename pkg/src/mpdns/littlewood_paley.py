"""Dyadic partition of unity, blocks and homogeneous Besov norms on the grid.

Blocks act as Fourier multipliers phi(2^-j |k|). The mean mode is never part
of a block, so decompositions reconstruct f - mean(f).
"""
import logging
import math
from collections import namedtuple
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from mpdns.spectral import (Field, Grid, SpectralScalarField, SpectralVectorField, _like,
                            lp_norm)

log = logging.getLogger(__name__)

PROFILE_VERSION = "exp-bump-1"
CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0
PHI_INNER = 3.0 / 4.0
PHI_OUTER = 8.0 / 3.0

BesovParams = namedtuple("BesovParams", ["s", "p", "q"])


def _mollifier(x):
    """exp(-1/x) for x > 0, zero otherwise."""
    x = np.asarray(x, dtype=float)
    positive = x > 0
    safe = np.where(positive, x, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def chi_profile(r):
    """Smooth radial cut-off: 1 for r <= 3/4, 0 for r >= 4/3, monotone between."""
    inner = _mollifier(CHI_OUTER - np.asarray(r, dtype=float))
    outer = _mollifier(np.asarray(r, dtype=float) - CHI_INNER)
    return inner / (inner + outer)


def phi_profile(r):
    """Annulus profile phi(r) = chi(r/2) - chi(r), supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=float)
    return chi_profile(r / 2.0) - chi_profile(r)


def validate_besov_params(params: BesovParams) -> BesovParams:
    if not (params.p >= 1 and params.q >= 1):
        raise ValueError(f"Besov exponents need p, q >= 1, got {params}")
    return params


class DyadicPartition:
    """Sampled multipliers phi_j(k) = phi(2^-j |k|) for every j carrying lattice modes."""
    def __init__(self, grid: Grid, j_min: int, j_max: int,
                 chi: Callable = chi_profile, phi: Callable = phi_profile):
        self.grid = grid
        self.j_min = j_min
        self.j_max = j_max
        self.chi_profile = chi
        self.phi_profile = phi
        self.multipliers = {}  # type: Dict[int, np.ndarray]
        for j in self.js:
            mult = phi(2.0 ** -j * grid.k_mag)
            mult[0, 0, 0] = 0.0
            self.multipliers[j] = mult

    @property
    def js(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def contains(self, j: int) -> bool:
        return self.j_min <= j <= self.j_max

    def multiplier(self, j: int) -> np.ndarray:
        return self.multipliers[j]

    def __repr__(self):
        return f"DyadicPartition({self.grid}, j={self.j_min}..{self.j_max}, profile={PROFILE_VERSION})"


def build_partition(grid: Grid, phi: Optional[Callable] = None) -> DyadicPartition:
    """Partition covering every nonzero lattice wavenumber of the grid.

    j_min is the lowest block reaching |k| = 1, j_max the highest block
    reaching the largest lattice |k| = sqrt(3) n/2.
    """
    k_max = math.sqrt(3.0) * grid.n / 2
    j_min = math.ceil(math.log2(1.0 / PHI_OUTER))
    j_max = math.floor(math.log2(k_max / PHI_INNER))
    partition = DyadicPartition(grid, j_min, j_max, phi=phi or phi_profile)
    log.info(f"Built {partition}.")
    return partition


def partition_of_unity_error(partition: DyadicPartition) -> float:
    """Largest |sum_j phi_j(k) - 1| over nonzero lattice points."""
    total = sum(partition.multipliers.values())
    nonzero = partition.grid.k_sq > 0
    return float(np.abs(total[nonzero] - 1.0).max())


def support_overlap_error(partition: DyadicPartition) -> float:
    """Largest |phi_j phi_q| over pairs with |j - q| >= 2."""
    worst = 0.0
    for j in partition.js:
        for q in range(j + 2, partition.j_max + 1):
            worst = max(worst, float(np.abs(partition.multipliers[j] * partition.multipliers[q]).max()))
    return worst


def dyadic_block(f: Field, j: int, partition: DyadicPartition) -> Field:
    """Delta_j f; blocks outside the representable band are empty.

    The returned field carries ``out_of_band`` so callers can tell an empty
    band from a block that merely has no energy.
    """
    if not partition.contains(j):
        log.warning(f"Block j={j} outside partition band {partition.j_min}..{partition.j_max}; "
                    f"returning an empty block.")
        block = _like(f, np.zeros_like(f.coeffs))
        block.out_of_band = True
        return block
    block = _like(f, partition.multipliers[j] * f.coeffs)
    block.out_of_band = False
    return block


def low_frequency_cutoff(f: Field, j: int, partition: DyadicPartition) -> Field:
    """S_j f = sum of Delta_q f over q <= j-1."""
    mult = np.zeros(partition.grid.shape)
    for q in partition.js:
        if q <= j - 1:
            mult = mult + partition.multipliers[q]
    return _like(f, mult * f.coeffs)


class DyadicDecomposition:
    """All nonzero-band blocks of a field, ordered by j."""
    def __init__(self, grid: Grid, blocks: List[Tuple[int, Field]]):
        self.grid = grid
        self.blocks = blocks

    def reconstruct(self) -> Field:
        total = np.zeros_like(self.blocks[0][1].coeffs)
        for _, block in self.blocks:
            total = total + block.coeffs
        return _like(self.blocks[0][1], total)

    def block(self, j: int) -> Field:
        for q, b in self.blocks:
            if q == j:
                return b
        raise KeyError(j)


def decompose(f: Field, partition: DyadicPartition) -> DyadicDecomposition:
    return DyadicDecomposition(f.grid, [(j, dyadic_block(f, j, partition)) for j in partition.js])


def block_norms(f: Field, p: float, partition: DyadicPartition) -> np.ndarray:
    """||Delta_j f_c||_p for each component c (rows) and band j (columns)."""
    components = f.components if isinstance(f, SpectralVectorField) else (f,)
    norms = np.zeros((len(components), len(partition.js)))
    for c, comp in enumerate(components):
        for i, j in enumerate(partition.js):
            mult = partition.multipliers[j]
            # skip bands the field has no energy in
            if not np.any(mult * comp.coeffs):
                continue
            norms[c, i] = lp_norm(SpectralScalarField(f.grid, mult * comp.coeffs), p)
    return norms


def besov_from_block_norms(norms: np.ndarray, js, s: float, q: float) -> float:
    """Combine stored block norms with the 2^{js} weights; components combine in l^2."""
    weights = 2.0 ** (s * np.asarray(list(js), dtype=float))
    weighted = norms * weights[None, :]
    if np.isinf(q):
        per_component = weighted.max(axis=1)
    else:
        per_component = np.sum(weighted ** q, axis=1) ** (1.0 / q)
    return float(np.sqrt(np.sum(per_component ** 2)))


def besov_norm(f: Field, params: BesovParams, partition: DyadicPartition) -> float:
    params = validate_besov_params(params)
    norms = block_norms(f, params.p, partition)
    return besov_from_block_norms(norms, partition.js, params.s, params.q)


def sobolev_norm(f: Field, s: float) -> float:
    """Homogeneous H^s norm from the exact multiplier |k|^s, k=0 excluded."""
    grid = f.grid
    nonzero = grid.k_sq > 0
    weight = np.zeros(grid.shape)
    weight[nonzero] = grid.k_sq[nonzero] ** s
    return float(np.sqrt(grid.volume * np.sum(weight * np.abs(f.coeffs) ** 2)))
