"""Empirical checks of the interpolation, anisotropic Sobolev and Besov
embedding inequalities on families of band-limited fields.

Constants are reported, never compared against a theoretical value.
"""
import logging
import math
from collections import namedtuple
from typing import Dict, Optional, Sequence

import numpy as np

from mpdns.littlewood_paley import BesovParams, DyadicPartition, besov_norm, build_partition, sobolev_norm
from mpdns.spectral import (Grid, SpectralScalarField, gradient_norm_sq, lp_norm, partial_derivative,
                            random_coefficients)

log = logging.getLogger(__name__)

SIDE_CONDITION_TOL = 1e-12
MEAN_FREE_TOL = 1e-12

InequalityReport = namedtuple("InequalityReport", [
    "lemma", "params", "lhs", "rhs", "ratio", "degenerate", "descriptor", "seed",
])
FamilyStats = namedtuple("FamilyStats", ["count", "max", "median", "finite", "running_max"])


def _report(lemma: str, params: Dict[str, float], lhs: float, rhs: float,
            descriptor: str, seed: Optional[int]) -> InequalityReport:
    if rhs > 0:
        ratio, degenerate = lhs / rhs, False
    else:
        ratio, degenerate = 0.0, True
        log.debug(f"{lemma}: degenerate right-hand side for {descriptor} (lhs={lhs:.3e}).")
    return InequalityReport(lemma, params, lhs, rhs, ratio, degenerate, descriptor, seed)


def format_params(params: Dict[str, float]) -> str:
    return ";".join(f"{key}={value:.17g}" for key, value in params.items())


def _require_mean_free(f: SpectralScalarField):
    scale = max(float(np.abs(f.coeffs).max()), 1e-300)
    if abs(f.coeffs[0, 0, 0]) > MEAN_FREE_TOL * scale:
        raise ValueError("inequality only applies to mean-free fields on the torus")


def interpolation_params(alpha: float, p: float, q: float) -> Dict[str, float]:
    if not (1 <= q < p < math.inf) or not alpha > 0:
        raise ValueError(f"need 1 <= q < p < inf and alpha > 0, got alpha={alpha}, p={p}, q={q}")
    theta = q / p
    beta = alpha * (p / q - 1.0)
    if (abs(theta * p - q) > SIDE_CONDITION_TOL * q
            or abs(beta * q - alpha * (p - q)) > SIDE_CONDITION_TOL * alpha * p):
        raise ValueError("interpolation side conditions violated")
    return {"alpha": alpha, "p": p, "q": q, "theta": theta, "beta": beta}


def check_interpolation(f: SpectralScalarField, alpha: float, p: float, q: float,
                        partition: Optional[DyadicPartition] = None,
                        descriptor: str = "field", seed: Optional[int] = None) -> InequalityReport:
    """||f||_p against ||f||_{B^-alpha_inf,inf}^(1-theta) ||f||_{B^beta_q,q}^theta."""
    params = interpolation_params(alpha, p, q)
    partition = partition or build_partition(f.grid)
    theta = params["theta"]
    lhs = lp_norm(f, p)
    low = besov_norm(f, BesovParams(-alpha, math.inf, math.inf), partition)
    high = besov_norm(f, BesovParams(params["beta"], q, q), partition)
    rhs = low ** (1.0 - theta) * high ** theta
    return _report("interpolation", params, lhs, rhs, descriptor, seed)


def anisotropic_params(theta: float, lam: float, kappa: float) -> Dict[str, float]:
    for name, value in (("theta", theta), ("lambda", lam), ("kappa", kappa)):
        if not 1 <= value < math.inf:
            raise ValueError(f"{name}={value} must lie in [1, inf)")
    total = 1.0 / theta + 1.0 / lam + 1.0 / kappa
    if not total > 1:
        raise ValueError(f"need 1/theta + 1/lambda + 1/kappa > 1, got {total}")
    mu = 3.0 / (total - 1.0)
    if abs(1.0 + 3.0 / mu - total) > SIDE_CONDITION_TOL:
        raise ValueError("anisotropic side condition violated")
    return {"mu": mu, "theta": theta, "lambda": lam, "kappa": kappa}


def check_anisotropic(f: SpectralScalarField, theta: float = 2.0, lam: float = 2.0, kappa: float = 2.0,
                      descriptor: str = "field", seed: Optional[int] = None) -> InequalityReport:
    """||f||_mu against the product of the cube roots of the directional derivative norms."""
    _require_mean_free(f)
    params = anisotropic_params(theta, lam, kappa)
    lhs = lp_norm(f, params["mu"])
    rhs = 1.0
    for axis, exponent in zip((1, 2, 3), (theta, lam, kappa)):
        rhs *= lp_norm(partial_derivative(f, axis), exponent) ** (1.0 / 3.0)
    return _report("anisotropic", params, lhs, rhs, descriptor, seed)


def check_embedding(f: SpectralScalarField, r: float, partition: Optional[DyadicPartition] = None,
                    descriptor: str = "field", seed: Optional[int] = None) -> InequalityReport:
    """||f||_{B^-r_inf,inf} against ||f||_{L^(3/r)}."""
    if not 0 < r < 1:
        raise ValueError(f"r={r} outside 0 < r < 1")
    _require_mean_free(f)
    partition = partition or build_partition(f.grid)
    lhs = besov_norm(f, BesovParams(-r, math.inf, math.inf), partition)
    rhs = lp_norm(f, 3.0 / r)
    return _report("embedding", {"r": r, "p": 3.0 / r}, lhs, rhs, descriptor, seed)


def check_sobolev_interpolation(f: SpectralScalarField, r: float,
                                descriptor: str = "field", seed: Optional[int] = None) -> InequalityReport:
    """||f||_{H^r} against ||f||_2^(1-r) ||grad f||_2^r; holds with constant one."""
    if not 0 < r < 1:
        raise ValueError(f"r={r} outside 0 < r < 1")
    lhs = sobolev_norm(f, r)
    rhs = lp_norm(f, 2) ** (1.0 - r) * math.sqrt(gradient_norm_sq(f)) ** r
    return _report("sobolev_interpolation", {"r": r}, lhs, rhs, descriptor, seed)


def check_lebesgue_interpolation(f: SpectralScalarField,
                                 descriptor: str = "field", seed: Optional[int] = None) -> InequalityReport:
    """||f||_3^3 against ||f||_2^(3/2) ||f||_6^(3/2); holds with constant one."""
    lhs = lp_norm(f, 3) ** 3
    rhs = lp_norm(f, 2) ** 1.5 * lp_norm(f, 6) ** 1.5
    return _report("lebesgue_interpolation", {"p": 3.0, "p0": 2.0, "p1": 6.0}, lhs, rhs, descriptor, seed)


def random_bandlimited_field(grid: Grid, seed: int, slope: float, kmax: float) -> SpectralScalarField:
    """Mean-free real field with |c(k)| ~ |k|^slope up to kmax, unit L^2 norm.

    slope=-inf keeps only the outer shell kmax-1 < |k| <= kmax.
    """
    if kmax > grid.dealias_cutoff:
        raise ValueError(f"kmax={kmax} exceeds the dealias cutoff {grid.dealias_cutoff}")
    if kmax < 1:
        raise ValueError(f"kmax={kmax} leaves no modes")
    rng = np.random.default_rng(seed)
    shell = np.isneginf(slope)
    coeffs = random_coefficients(grid, rng, kmax, 0.0 if shell else slope, shell=shell)
    coeffs = coeffs / np.sqrt(grid.volume * np.sum(np.abs(coeffs) ** 2))
    return SpectralScalarField(grid, coeffs)


def family_statistics(reports: Sequence[InequalityReport]) -> FamilyStats:
    ratios = np.array([rep.ratio for rep in reports if not rep.degenerate], dtype=float)
    if len(ratios) == 0:
        return FamilyStats(0, 0.0, 0.0, True, np.zeros(0))
    return FamilyStats(
        count=len(ratios),
        max=float(ratios.max()),
        median=float(np.median(ratios)),
        finite=bool(np.all(np.isfinite(ratios))),
        running_max=np.maximum.accumulate(ratios),
    )
