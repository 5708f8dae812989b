"""Per-time diagnostics along a trajectory: energy terms, a priori quantities
and the Besov criterion integrand for d3 u."""
import logging
import math
from collections import namedtuple
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from mpdns.errors import BlowUpError
from mpdns.littlewood_paley import (DyadicPartition, besov_from_block_norms, block_norms,
                                    build_partition)
from mpdns.spectral import (SpectralVectorField, curl, divergence, gradient_norm_sq,
                            inner_product, l2_norm_sq, laplacian_norm_sq, partial_derivative)

log = logging.getLogger(__name__)

CSV_HEADER = [
    "t", "energy_u", "energy_omega", "grad_u_sq", "grad_omega_sq", "d3u_sq", "grad_d3u_sq",
    "laplacian_u_sq", "div_omega_sq", "besov_d3u", "criterion_integrand", "criterion_accum", "lnY",
]

MonitorRecord = namedtuple("MonitorRecord", [
    "t", "energy_u", "energy_omega", "grad_u_sq", "grad_omega_sq", "d3u_sq", "grad_d3u_sq",
    "laplacian_u_sq", "div_omega_sq", "besov_d3u", "criterion_integrand", "criterion_accum", "Y",
    "coupling_work", "laplacian_omega_sq", "grad_div_omega_sq", "dissipation_accum",
    "uncoupled_dissipation_accum", "r", "j_min", "d3u_blocks",
])

EnergyBudget = namedtuple("EnergyBudget", [
    "times", "residuals", "uncoupled_residuals", "max_relative_residual",
    "max_relative_uncoupled_residual", "max_per_step_residual", "initial_energy",
])

GronwallSummary = namedtuple("GronwallSummary", [
    "ln_Y", "ln_Y_final", "sup_grad_sq", "grad_u_Y_integral", "criterion_integral",
    "d3u_exponent", "grad_u_exponent", "d3u_constant", "grad_u_constant",
    "energy_non_increasing", "finite", "monotone",
])


def criterion_integrand(besov_d3u: float, r: float) -> float:
    return float(np.float_power(besov_d3u, 2.0 / (1.0 - r)))


def csv_row(record: MonitorRecord) -> List[float]:
    values = [getattr(record, name) for name in CSV_HEADER[:-1]]
    return values + [math.log(record.Y)]


def snapshot(state, r: float, partition: Optional[DyadicPartition] = None) -> MonitorRecord:
    """All monitored norms of ``state``; the accumulated integrals are left at zero."""
    if not 0 < r < 1:
        raise ValueError(f"r={r} outside 0 < r < 1")
    u, omega = state.u, state.omega
    if partition is None:
        partition = build_partition(u.grid)

    grad_u_sq = gradient_norm_sq(u)
    if not np.all(np.isfinite(u.coeffs)) or not np.all(np.isfinite(omega.coeffs)):
        raise BlowUpError(state.t, grad_u_sq)

    d3u = partial_derivative(u, 3)
    div_omega = divergence(omega)
    blocks = block_norms(d3u, np.inf, partition)
    besov_d3u = besov_from_block_norms(blocks, partition.js, -r, np.inf)
    grad_omega_sq = gradient_norm_sq(omega)

    return MonitorRecord(
        t=state.t,
        energy_u=0.5 * l2_norm_sq(u),
        energy_omega=0.5 * l2_norm_sq(omega),
        grad_u_sq=grad_u_sq,
        grad_omega_sq=grad_omega_sq,
        d3u_sq=l2_norm_sq(d3u),
        grad_d3u_sq=gradient_norm_sq(d3u),
        laplacian_u_sq=laplacian_norm_sq(u),
        div_omega_sq=l2_norm_sq(div_omega),
        besov_d3u=besov_d3u,
        criterion_integrand=criterion_integrand(besov_d3u, r),
        criterion_accum=0.0,
        Y=grad_u_sq + grad_omega_sq + math.e,
        coupling_work=2.0 * inner_product(curl(u), omega),
        laplacian_omega_sq=laplacian_norm_sq(omega),
        grad_div_omega_sq=gradient_norm_sq(div_omega),
        dissipation_accum=0.0,
        uncoupled_dissipation_accum=0.0,
        r=r,
        j_min=partition.j_min,
        d3u_blocks=blocks,
    )


def _times(records: Sequence[MonitorRecord]) -> np.ndarray:
    t = np.array([rec.t for rec in records], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("records must be sorted by strictly increasing t")
    return t


def accumulate(records: Sequence[MonitorRecord]) -> List[MonitorRecord]:
    """Running trapezoidal integral of the criterion integrand."""
    if not records:
        return []
    t = _times(records)
    integrand = np.array([rec.criterion_integrand for rec in records])
    accum = cumulative_trapezoid(integrand, t, initial=0.0)
    return [rec._replace(criterion_accum=float(a)) for rec, a in zip(records, accum)]


def reweight(records: Sequence[MonitorRecord], r: float) -> List[MonitorRecord]:
    """Records re-evaluated for another criterion exponent from the stored block norms."""
    if not 0 < r < 1:
        raise ValueError(f"r={r} outside 0 < r < 1")
    out = []
    for rec in records:
        js = range(rec.j_min, rec.j_min + rec.d3u_blocks.shape[1])
        besov = besov_from_block_norms(rec.d3u_blocks, js, -r, np.inf)
        out.append(rec._replace(r=r, besov_d3u=besov, criterion_integrand=criterion_integrand(besov, r)))
    return accumulate(out)


def energy_budget_report(records: Sequence[MonitorRecord], dt: Optional[float] = None) -> EnergyBudget:
    """Residual of the energy balance between consecutive records.

    The dissipation integrals come from ``run``, which integrates them over
    every time step, so a residual is the time-stepping error of its interval.
    The balance includes the coupling work 2<curl u, omega>;
    ``uncoupled_residuals`` leave it out.
    """
    t = _times(records)
    energy = np.array([rec.energy_u + rec.energy_omega for rec in records])
    change = np.diff(energy)
    residuals = change + np.diff([rec.dissipation_accum for rec in records])
    uncoupled_residuals = change + np.diff([rec.uncoupled_dissipation_accum for rec in records])

    scale = energy[0] if energy[0] > 0 else 1.0
    max_rel = float(np.abs(residuals).max() / scale) if len(residuals) else 0.0
    max_rel_uncoupled = float(np.abs(uncoupled_residuals).max() / scale) if len(residuals) else 0.0
    max_per_step = max_rel
    if dt is not None and len(residuals):
        steps = np.maximum(np.rint(np.diff(t) / dt), 1.0)
        max_per_step = float(np.abs(residuals / steps).max() / scale)

    log.info(f"Energy budget over {len(records)} records: max relative residual {max_rel:.3e}.")
    return EnergyBudget(t, residuals, uncoupled_residuals, max_rel, max_rel_uncoupled, max_per_step,
                        float(energy[0]))


def _empirical_constant(growth: np.ndarray, exponent: np.ndarray) -> float:
    """Smallest C with growth(t) <= C * exponent(t) along the trajectory."""
    valid = exponent > 0
    if not np.any(valid):
        return 0.0
    return float(max(0.0, np.max(growth[valid] / exponent[valid])))


def gronwall_report(records: Sequence[MonitorRecord]) -> GronwallSummary:
    """Raw ingredients of the Gronwall bounds on d3u, grad u and Y."""
    if not records:
        raise ValueError("gronwall_report needs at least one record")
    t = _times(records) if len(records) > 1 else np.array([records[0].t])
    Y = np.array([rec.Y for rec in records])
    ln_Y = np.log(Y)
    grad_u = np.array([rec.grad_u_sq for rec in records])
    grad_sq = grad_u + np.array([rec.grad_omega_sq for rec in records])
    integrand = np.array([rec.criterion_integrand for rec in records])
    d3u_sq = np.array([rec.d3u_sq for rec in records])
    grad_d3u_sq = np.array([rec.grad_d3u_sq for rec in records])
    energy = np.array([rec.energy_u + rec.energy_omega for rec in records])
    accum = np.array([rec.criterion_accum for rec in records])

    if len(records) > 1:
        d3u_exponent = cumulative_trapezoid(1.0 + grad_sq + integrand, t, initial=0.0)
        grad_u_exponent = cumulative_trapezoid(grad_d3u_sq + grad_sq + 1.0, t, initial=0.0)
        grad_u_Y = float(trapezoid(grad_u * Y, t))
        criterion = float(trapezoid(integrand, t))
    else:
        d3u_exponent = grad_u_exponent = np.zeros(1)
        grad_u_Y = criterion = 0.0

    d3u_constant = _empirical_constant(np.log((1.0 + d3u_sq) / (1.0 + d3u_sq[0])), d3u_exponent)
    grad_u_constant = _empirical_constant(np.log((math.e + grad_u) / (math.e + grad_u[0])),
                                          grad_u_exponent)

    values = [ln_Y, grad_sq, d3u_exponent, grad_u_exponent, grad_u_Y, criterion]
    finite = all(np.all(np.isfinite(v)) for v in values)
    monotone = bool(np.all(np.diff(accum) >= 0))
    if not finite:
        log.warning("Gronwall ingredients contain non-finite values.")
    if not monotone:
        log.warning("Criterion accumulation is not monotone.")

    return GronwallSummary(
        ln_Y=ln_Y,
        ln_Y_final=float(ln_Y[-1]),
        sup_grad_sq=float(grad_sq.max()),
        grad_u_Y_integral=grad_u_Y,
        criterion_integral=criterion,
        d3u_exponent=float(d3u_exponent[-1]),
        grad_u_exponent=float(grad_u_exponent[-1]),
        d3u_constant=d3u_constant,
        grad_u_constant=grad_u_constant,
        energy_non_increasing=bool(np.all(np.diff(energy) <= 1e-12 * max(energy[0], 1.0))),
        finite=finite,
        monotone=monotone,
    )
