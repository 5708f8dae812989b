"""Time integration of the micropolar system on the periodic box.

    du/dt + (u.grad)u + grad(pi) = lap(u) + curl(omega),      div(u) = 0
    domega/dt + (u.grad)omega + 2 omega = lap(omega) + grad(div(omega)) + curl(u)

The diagonal parts (-|k|^2 for u, -|k|^2 - 2 for omega) are integrated exactly
with an integrating factor; everything else is stepped with classical RK4.
Inside the time loop the fields live on the real-transform half lattice.
"""
import logging
import math
from collections import namedtuple
from functools import lru_cache
from typing import Callable, List, Optional, Sequence

import numpy as np

from mpdns.errors import BlowUpError, ConfigError
from mpdns.littlewood_paley import build_partition
from mpdns.monitor import MonitorRecord, snapshot
from mpdns.spectral import (Grid, SpectralScalarField, SpectralVectorField, curl_coeffs,
                            divergence_coeffs, forward, forward_half, from_half, grad_div_coeffs,
                            half_inner, inverse, inverse_half, leray_coeffs, random_coefficients,
                            to_half)

log = logging.getLogger(__name__)

ANGULAR_DAMPING = 2.0
GROWTH_LIMIT = 1e6
CFL_LIMIT = 0.5

SimState = namedtuple("SimState", ["u", "omega", "t"])
SolverConfig = namedtuple("SolverConfig", ["n", "dt", "t_end", "r", "monitor_stride", "coupled"],
                          defaults=[1e-3, 1.0, 0.5, 10, True])
RunResult = namedtuple("RunResult", ["state", "status", "records"])


def validate_solver_config(config: SolverConfig) -> SolverConfig:
    if not 0 < config.r < 1:
        raise ConfigError(f"r={config.r} outside 0 < r < 1")
    if not config.dt > 0:
        raise ConfigError(f"dt={config.dt} must be positive")
    if not config.t_end >= 0:
        raise ConfigError(f"t_end={config.t_end} must be non-negative")
    if config.monitor_stride < 1:
        raise ConfigError(f"monitor_stride={config.monitor_stride} must be >= 1")
    return config


def _nonlinear_half(u: np.ndarray, w: np.ndarray, grid: Grid, coupled: bool = True):
    """Right-hand side without the diagonal dissipation and damping, on the half lattice.

    Velocity advection is taken in rotational form u x curl(u). It differs from
    -(u.grad)u by a gradient, which the projection removes, as long as u stays
    inside the dealiased band.
    """
    curl_u = curl_coeffs(u, grid, half=True)
    grad_w = [1j * k * w for k in grid.k_half]
    phys = inverse_half(np.concatenate([u, curl_u] + grad_w), grid.n)
    u_x, vort = phys[:3], phys[3:6]
    # grad_w_x[j, i] = d_j omega_i
    grad_w_x = phys[6:].reshape((3, 3) + grid.shape)

    products = np.empty((6,) + grid.shape)
    products[:3] = np.cross(u_x, vort, axis=0)
    products[3:] = u_x[0] * grad_w_x[0] + u_x[1] * grad_w_x[1] + u_x[2] * grad_w_x[2]
    nonlinear = forward_half(products) * grid.dealias_mask_half

    nu = nonlinear[:3]
    nw = grad_div_coeffs(w, grid, half=True) - nonlinear[3:]
    if coupled:
        nu = nu + curl_coeffs(w, grid, half=True)
        nw = nw + curl_u
    return leray_coeffs(nu, grid, half=True), nw


def _grad_sq_half(u: np.ndarray, grid: Grid) -> float:
    return half_inner(grid.k_sq_half * u, u, grid)


def _check_finite(t: float, grid: Grid, u: np.ndarray, w: np.ndarray, quantity: str = "|grad u|^2"):
    if np.all(np.isfinite(u)) and np.all(np.isfinite(w)):
        return
    with np.errstate(over="ignore", invalid="ignore"):
        norm = _grad_sq_half(u, grid)
    raise BlowUpError(t, norm, quantity=quantity)


def _dissipation_rates(u, w, du, dw, grid: Grid, coupled: bool = True) -> np.ndarray:
    """Dissipation D with and without the coupling work, and their time derivatives.

    D = |grad u|^2 + |grad omega|^2 + 2|omega|^2 + |div omega|^2 - 2<curl u, omega>
    Uncoupled dynamics do no coupling work, so both entries agree.
    """
    k_sq = grid.k_sq_half
    div_w = divergence_coeffs(w, grid, half=True)
    curl_u = curl_coeffs(u, grid, half=True)
    uncoupled = (half_inner(k_sq * u, u, grid) + half_inner((k_sq + ANGULAR_DAMPING) * w, w, grid)
                 + half_inner(div_w, div_w, grid))
    d_uncoupled = 2.0 * (half_inner(k_sq * u, du, grid)
                         + half_inner((k_sq + ANGULAR_DAMPING) * w, dw, grid)
                         + half_inner(div_w, divergence_coeffs(dw, grid, half=True), grid))
    if not coupled:
        return np.array([uncoupled, uncoupled, d_uncoupled, d_uncoupled])
    coupling = 2.0 * half_inner(curl_u, w, grid)
    d_coupling = 2.0 * (half_inner(curl_coeffs(du, grid, half=True), w, grid)
                        + half_inner(curl_u, dw, grid))
    return np.array([uncoupled - coupling, uncoupled, d_uncoupled - d_coupling, d_uncoupled])


def _evaluate(u: np.ndarray, w: np.ndarray, grid: Grid, coupled: bool, t: float):
    """Explicit terms at (u, w) and the dissipation rates of that state."""
    with np.errstate(over="ignore", invalid="ignore"):
        terms = _nonlinear_half(u, w, grid, coupled)
        du = terms[0] - grid.k_sq_half * u
        dw = terms[1] - (grid.k_sq_half + ANGULAR_DAMPING) * w
        rates = _dissipation_rates(u, w, du, dw, grid, coupled)
    _check_finite(t, grid, du, dw, quantity="|grad du/dt|^2")
    return terms, rates


def rhs(state: SimState, coupled: bool = True):
    """Full time derivatives (du, domega) of the state."""
    grid = state.u.grid
    u, w = to_half(state.u.coeffs), to_half(state.omega.coeffs)
    with np.errstate(over="ignore", invalid="ignore"):
        nu, nw = _nonlinear_half(u, w, grid, coupled)
        du = nu - grid.k_sq_half * u
        dw = nw - (grid.k_sq_half + ANGULAR_DAMPING) * w
    _check_finite(state.t, grid, du, dw, quantity="|grad du/dt|^2")
    return (SpectralVectorField(grid, from_half(du), solenoidal=True),
            SpectralVectorField(grid, from_half(dw)))


@lru_cache(maxsize=16)
def _integrating_factors(grid: Grid, dt: float):
    lin_u = -grid.k_sq_half
    lin_w = -grid.k_sq_half - ANGULAR_DAMPING
    return (np.exp(0.5 * dt * lin_u), np.exp(dt * lin_u),
            np.exp(0.5 * dt * lin_w), np.exp(dt * lin_w))


def _step_half(u0: np.ndarray, w0: np.ndarray, dt: float, grid: Grid, coupled: bool = True,
               terms=None):
    """Integrating-factor RK4 on the half lattice; ``terms`` are the explicit terms at (u0, w0)."""
    eu_half, eu_full, ew_half, ew_full = _integrating_factors(grid, float(dt))

    with np.errstate(over="ignore", invalid="ignore"):
        ku1, kw1 = terms if terms is not None else _nonlinear_half(u0, w0, grid, coupled)
        u_a = eu_half * (u0 + 0.5 * dt * ku1)
        w_a = ew_half * (w0 + 0.5 * dt * kw1)
        ku2, kw2 = _nonlinear_half(u_a, w_a, grid, coupled)
        u_b = eu_half * u0 + 0.5 * dt * ku2
        w_b = ew_half * w0 + 0.5 * dt * kw2
        ku3, kw3 = _nonlinear_half(u_b, w_b, grid, coupled)
        u_c = eu_full * u0 + dt * eu_half * ku3
        w_c = ew_full * w0 + dt * ew_half * kw3
        ku4, kw4 = _nonlinear_half(u_c, w_c, grid, coupled)

        u_new = eu_full * u0 + dt / 6.0 * (eu_full * ku1 + 2.0 * eu_half * (ku2 + ku3) + ku4)
        w_new = ew_full * w0 + dt / 6.0 * (ew_full * kw1 + 2.0 * ew_half * (kw2 + kw3) + kw4)
        u_new = leray_coeffs(u_new, grid, half=True)
    return u_new, w_new


def _full_state(u: np.ndarray, w: np.ndarray, t: float, grid: Grid) -> SimState:
    return SimState(SpectralVectorField(grid, from_half(u), solenoidal=True),
                    SpectralVectorField(grid, from_half(w)), t)


def step(state: SimState, dt: float, coupled: bool = True) -> SimState:
    """One integrating-factor RK4 step."""
    grid = state.u.grid
    u_new, w_new = _step_half(to_half(state.u.coeffs), to_half(state.omega.coeffs), dt, grid, coupled)
    t_new = state.t + dt
    _check_finite(t_new, grid, u_new, w_new)
    return _full_state(u_new, w_new, t_new, grid)


def _advection(u_phys: np.ndarray, f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Dealiased coefficients of (u.grad) f for a vector field f."""
    grad_f = inverse(np.stack([1j * k * f_hat for k in grid.k], axis=1))
    products = np.einsum("jxyz,ijxyz->ixyz", u_phys, grad_f)
    return forward(products) * grid.dealias_mask


def pressure(state: SimState) -> SpectralScalarField:
    """Pressure from -lap(pi) = div((u.grad)u), zero mean."""
    grid = state.u.grid
    adv = _advection(inverse(state.u.coeffs), state.u.coeffs, grid)
    return SpectralScalarField(grid, divergence_coeffs(adv, grid) * grid.k_odd_sq_inv)


def cfl_number(state: SimState, dt: float) -> float:
    """max|u| dt k_cut with k_cut the dealias cutoff."""
    speed = np.sqrt(np.sum(inverse(state.u.coeffs) ** 2, axis=0)).max()
    return float(speed * dt * state.u.grid.dealias_cutoff)


def run(config: SolverConfig, init: SimState,
        sink: Optional[Callable[[MonitorRecord], None]] = None) -> RunResult:
    """Advance ``init`` to ``config.t_end``, handing a record to ``sink`` every stride.

    The dissipation is integrated over every step with the Hermite-corrected
    trapezoid rule, which is fourth order like the time stepper, and carried on
    the records as ``dissipation_accum``.
    """
    config = validate_solver_config(config)
    grid = init.u.grid
    partition = build_partition(grid)
    records = []  # type: List[MonitorRecord]

    def emit(state, dissipated):
        record = snapshot(state, config.r, partition)._replace(
            dissipation_accum=float(dissipated[0]), uncoupled_dissipation_accum=float(dissipated[1]))
        if records:
            prev = records[-1]
            area = 0.5 * (prev.criterion_integrand + record.criterion_integrand) * (record.t - prev.t)
            record = record._replace(criterion_accum=prev.criterion_accum + area)
        records.append(record)
        if sink is not None:
            sink(record)

    dissipated = np.zeros(2)
    emit(init, dissipated)

    remaining = max(0.0, config.t_end - init.t)
    n_steps = max(0, math.ceil(remaining / config.dt - 1e-9))
    cfl = cfl_number(init, config.dt)
    if cfl > CFL_LIMIT:
        log.warning(f"CFL number {cfl:.3g} exceeds {CFL_LIMIT}; the run may blow up.")
    log.info(f"Running {n_steps} steps of dt={config.dt} on {grid} (r={config.r}, "
             f"coupled={config.coupled}).")

    u, w, t = to_half(init.u.coeffs), to_half(init.omega.coeffs), init.t
    terms = rates = None
    grad_limit = GROWTH_LIMIT * records[0].grad_u_sq
    for i in range(1, n_steps + 1):
        # the last step lands exactly on t_end
        dt = config.t_end - t if i == n_steps else config.dt
        t_new = config.t_end if i == n_steps else init.t + i * config.dt
        try:
            if terms is None:
                terms, rates = _evaluate(u, w, grid, config.coupled, t)
            u_new, w_new = _step_half(u, w, dt, grid, config.coupled, terms)
            _check_finite(t_new, grid, u_new, w_new)
            grad_u_sq = _grad_sq_half(u_new, grid)
            if grad_limit > 0 and grad_u_sq > grad_limit:
                raise BlowUpError(t_new, grad_u_sq, "gradient growth limit exceeded")
            terms_new, rates_new = _evaluate(u_new, w_new, grid, config.coupled, t_new)
        except BlowUpError as err:
            log.error(f"Run stopped after {i - 1} steps: {err}")
            return RunResult(_full_state(u, w, t, grid), "blowup", records)

        dissipated = dissipated + (0.5 * dt * (rates[:2] + rates_new[:2])
                                   + dt * dt / 12.0 * (rates[2:] - rates_new[2:]))
        u, w, t, terms, rates = u_new, w_new, t_new, terms_new, rates_new
        log.debug(f"step {i}: t={t:.6f}")
        if i % config.monitor_stride == 0 or i == n_steps:
            emit(_full_state(u, w, t, grid), dissipated)

    state = _full_state(u, w, t, grid) if n_steps else init
    log.info(f"Run completed at t={state.t:.6g} with {len(records)} records.")
    return RunResult(state, "completed", records)




def taylor_green_init(grid: Grid) -> SimState:
    x1, x2, x3 = grid.coordinates()
    u = np.zeros((3,) + grid.shape)
    u[0] = np.sin(x1) * np.cos(x2) * np.cos(x3)
    u[1] = -np.cos(x1) * np.sin(x2) * np.cos(x3)
    u_hat = leray_coeffs(forward(u), grid)
    return SimState(SpectralVectorField(grid, u_hat, solenoidal=True),
                    SpectralVectorField(grid, np.zeros((3,) + grid.shape)), 0.0)


def constant_omega_init(grid: Grid, omega_bar: Sequence[float] = (0.0, 0.0, 1.0)) -> SimState:
    w_hat = np.zeros((3,) + grid.shape, dtype=complex)
    w_hat[:, 0, 0, 0] = omega_bar
    return SimState(SpectralVectorField(grid, np.zeros((3,) + grid.shape), solenoidal=True),
                    SpectralVectorField(grid, w_hat), 0.0)


def random_init(grid: Grid, seed: int, spectrum_slope: float = -5.0 / 3.0,
                amplitude: float = 1.0) -> SimState:
    """Random solenoidal u and random omega with energy spectrum ~ k^slope.

    Both fields are scaled to an rms magnitude of ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    kmax = grid.dealias_cutoff
    # shell energy ~ 4 pi k^2 |c|^2
    exponent = 0.5 * (spectrum_slope - 2.0)
    u_hat = np.stack([random_coefficients(grid, rng, kmax, exponent) for _ in range(3)])
    w_hat = np.stack([random_coefficients(grid, rng, kmax, exponent) for _ in range(3)])
    u_hat = leray_coeffs(u_hat, grid) * grid.dealias_mask
    w_hat = w_hat * grid.dealias_mask
    u_hat = amplitude * u_hat / np.sqrt(np.sum(np.abs(u_hat) ** 2))
    w_hat = amplitude * w_hat / np.sqrt(np.sum(np.abs(w_hat) ** 2))
    return SimState(SpectralVectorField(grid, u_hat, solenoidal=True),
                    SpectralVectorField(grid, w_hat), 0.0)
