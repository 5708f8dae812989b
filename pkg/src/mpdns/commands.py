"""simulate, verify and sweep commands. Each returns a process exit code."""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import fft

from mpdns.config import RunConfig, output_path, to_solver_config
from mpdns.errors import ConfigError
from mpdns.inequalities import (InequalityReport, check_anisotropic, check_embedding,
                                check_interpolation, check_lebesgue_interpolation,
                                check_sobolev_interpolation, family_statistics,
                                random_bandlimited_field)
from mpdns.littlewood_paley import (build_partition, decompose, partition_of_unity_error,
                                    support_overlap_error)
from mpdns.monitor import energy_budget_report, gronwall_report, reweight
from mpdns.save import (MonitorCsvWriter, ensure_dir, read_checkpoint, save_sweep_summary,
                        write_checkpoint, write_monitor_csv, write_report_csv)
from mpdns.solver import (RunResult, SimState, constant_omega_init, random_init, run,
                          taylor_green_init, validate_solver_config)
from mpdns.spectral import (Grid, SpectralScalarField, fft_workers, make_grid, split_workers,
                            to_spectral)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BLOWUP = 2

PARTITION_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
ORTHOGONALITY_TOL = 1e-12
PINNED_TOL = 1e-6
CHAIN_TOL = 1e-10
SPREAD_GUARD = 10.0
FAMILY_SLOPE = -1.0
INTERPOLATION_P, INTERPOLATION_Q = 4.0, 2.0

SWEEPABLE = {
    "r": float, "dt": float, "t_end": float, "n": int, "seed": int,
    "amplitude": float, "spectrum_slope": float, "monitor_stride": int,
}


def build_initial_state(config: RunConfig, grid: Grid) -> SimState:
    if config.init == "taylor_green":
        state = taylor_green_init(grid)
        return state._replace(u=config.amplitude * state.u)
    if config.init == "constant_omega":
        return constant_omega_init(grid, config.omega)
    if config.init == "random":
        return random_init(grid, config.seed, config.spectrum_slope, config.amplitude)
    try:
        state, _ = read_checkpoint(config.restart)
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot restart from {config.restart}: {err}") from None
    if state.u.grid != grid:
        raise ConfigError(f"checkpoint grid {state.u.grid} does not match n={config.n}")
    return state


def simulate(config: RunConfig) -> RunResult:
    """Run one simulation into ``config.output_dir``; config problems raise ConfigError."""
    ensure_dir(config.output_dir)
    solver_config = validate_solver_config(to_solver_config(config))
    grid = make_grid(config.n)
    init = build_initial_state(config, grid)

    with MonitorCsvWriter(output_path(config, config.monitor_csv)) as writer:
        result = run(solver_config, init, writer)
    write_checkpoint(output_path(config, config.checkpoint), result.state, config.dt)
    return result


def _summarize(config: RunConfig, result: RunResult):
    budget = energy_budget_report(result.records, config.dt) if len(result.records) > 1 else None
    summary = gronwall_report(result.records)
    residual = budget.max_relative_residual if budget else 0.0
    log.info(f"t={result.state.t:.6g} status={result.status} criterion={summary.criterion_integral:.6g} "
             f"sup grad^2={summary.sup_grad_sq:.6g} lnY(T)={summary.ln_Y_final:.6g} "
             f"energy residual={residual:.3e}")
    return [result.state.t, summary.criterion_integral, summary.sup_grad_sq, summary.ln_Y_final,
            residual, summary.energy_non_increasing]


def _status_code(status: str) -> int:
    return EXIT_BLOWUP if status == "blowup" else EXIT_OK


def cmd_simulate(config: RunConfig) -> int:
    try:
        with fft.set_workers(fft_workers()):
            result = simulate(config)
    except ConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_FAILURE
    _summarize(config, result)
    return _status_code(result.status)


class VerifySuite:
    """Collects report rows and the names of failed hard checks."""
    def __init__(self):
        self.reports = []  # type: List[InequalityReport]
        self.failures = []  # type: List[str]

    def add(self, report: InequalityReport):
        self.reports.append(report)

    def require(self, name: str, ok: bool, detail: str):
        if ok:
            log.info(f"check {name}: passed ({detail})")
        else:
            log.error(f"check {name}: FAILED ({detail})")
            self.failures.append(name)

    def tolerance_row(self, name: str, error: float, tol: float, seed=None, **params):
        params = dict(params, tol=tol)
        self.add(InequalityReport(name, params, error, tol, error / tol, False, name, seed))


def _with_mean(f: SpectralScalarField, mean: float) -> SpectralScalarField:
    coeffs = np.array(f.coeffs)
    coeffs[0, 0, 0] = mean
    return SpectralScalarField(f.grid, coeffs)


def _verify_littlewood_paley(suite: VerifySuite, grid: Grid, partition, fields: int):
    err = partition_of_unity_error(partition)
    suite.tolerance_row("partition_of_unity", err, PARTITION_TOL, n=grid.n)
    suite.require("partition_of_unity", err <= PARTITION_TOL, f"max error {err:.3e}")

    overlap = support_overlap_error(partition)
    suite.tolerance_row("support", overlap, ORTHOGONALITY_TOL, n=grid.n)
    suite.require("support", overlap <= ORTHOGONALITY_TOL, f"max overlap {overlap:.3e}")

    worst_rec = worst_orth = 0.0
    for seed in range(fields):
        f = _with_mean(random_bandlimited_field(grid, seed, FAMILY_SLOPE, grid.dealias_cutoff), 1.0)
        scale = float(np.abs(f.coeffs).max())
        rebuilt = decompose(f, partition).reconstruct()
        rec = float(np.abs(rebuilt.coeffs - (f.coeffs - _mean_only(f))).max()) / scale
        suite.tolerance_row("reconstruction", rec, RECONSTRUCTION_TOL, seed=seed, n=grid.n)

        orth = 0.0
        for j in partition.js:
            for q in range(j + 2, partition.j_max + 1):
                twice = partition.multiplier(q) * partition.multiplier(j) * f.coeffs
                orth = max(orth, float(np.abs(twice).max()) / scale)
        suite.tolerance_row("quasi_orthogonality", orth, ORTHOGONALITY_TOL, seed=seed, n=grid.n)
        worst_rec, worst_orth = max(worst_rec, rec), max(worst_orth, orth)

    suite.require("reconstruction", worst_rec <= RECONSTRUCTION_TOL, f"max error {worst_rec:.3e}")
    suite.require("quasi_orthogonality", worst_orth <= ORTHOGONALITY_TOL, f"max error {worst_orth:.3e}")


def _mean_only(f: SpectralScalarField) -> np.ndarray:
    mean = np.zeros_like(f.coeffs)
    mean[0, 0, 0] = f.coeffs[0, 0, 0]
    return mean


def _family_guard(suite: VerifySuite, name: str, reports: List[InequalityReport]):
    stats = family_statistics(reports)
    suite.require(f"{name}_finite", stats.finite and stats.count > 0,
                  f"{stats.count} non-degenerate ratios")
    suite.require(f"{name}_spread", stats.max < SPREAD_GUARD * stats.median,
                  f"max {stats.max:.4g}, median {stats.median:.4g}")


def sin_product_report(n: int) -> InequalityReport:
    """Anisotropic check of sin x1 sin x2 sin x3 on the n-point grid; mu = 6."""
    grid = make_grid(n)
    x1, x2, x3 = grid.coordinates()
    f = to_spectral(np.sin(x1) * np.sin(x2) * np.sin(x3), grid)
    return check_anisotropic(f, 2.0, 2.0, 2.0, descriptor="sin_product")


def _verify_inequalities(suite: VerifySuite, grid: Grid, partition, fields: int, r: float):
    kmax = grid.dealias_cutoff

    interpolation = []
    for seed in range(2 * fields):
        f = random_bandlimited_field(grid, seed, FAMILY_SLOPE, kmax)
        rep = check_interpolation(f, r, INTERPOLATION_P, INTERPOLATION_Q, partition,
                                  descriptor="random", seed=seed)
        suite.add(rep)
        interpolation.append(rep)
    _family_guard(suite, "interpolation", interpolation)

    anisotropic, embedding, chain_worst = [], [], 0.0
    for seed in range(fields):
        f = random_bandlimited_field(grid, seed, FAMILY_SLOPE, kmax)
        for rep in (check_anisotropic(f, descriptor="random", seed=seed),
                    check_embedding(f, r, partition, descriptor="random", seed=seed),
                    check_sobolev_interpolation(f, r, descriptor="random", seed=seed),
                    check_lebesgue_interpolation(f, descriptor="random", seed=seed)):
            suite.add(rep)
            if rep.lemma == "anisotropic":
                anisotropic.append(rep)
            elif rep.lemma == "embedding":
                embedding.append(rep)
            else:
                chain_worst = max(chain_worst, rep.ratio)
    stats = family_statistics(anisotropic)
    suite.require("anisotropic_finite", stats.finite and stats.count > 0,
                  f"{stats.count} non-degenerate ratios")
    _family_guard(suite, "embedding", embedding)
    suite.require("interpolation_chain", chain_worst <= 1.0 + CHAIN_TOL, f"max ratio {chain_worst:.12f}")

    pinned = sin_product_report(grid.n)
    suite.add(pinned)
    exact_lhs = math.sqrt(5.0 * math.pi / 8.0)
    exact_rhs = math.pi ** 1.5
    oracle = sin_product_report(2 * grid.n).lhs
    lhs_err = abs(pinned.lhs - exact_lhs) / exact_lhs
    oracle_err = abs(pinned.lhs - oracle) / oracle
    rhs_err = abs(pinned.rhs - exact_rhs) / exact_rhs
    suite.require("anisotropic_pinned", max(lhs_err, oracle_err, rhs_err) <= PINNED_TOL,
                  f"ratio {pinned.ratio:.10f}, lhs error {lhs_err:.2e}, oracle error {oracle_err:.2e}, "
                  f"rhs error {rhs_err:.2e}")


def cmd_verify(config: RunConfig, phi: Optional[Callable] = None) -> int:
    """Run the Littlewood-Paley and inequality suites; ``phi`` replaces the partition profile."""
    try:
        ensure_dir(config.output_dir)
        grid = make_grid(config.n)
    except ConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_FAILURE

    partition = build_partition(grid, phi=phi)
    suite = VerifySuite()
    with fft.set_workers(fft_workers()):
        _verify_littlewood_paley(suite, grid, partition, config.verify_fields)
        _verify_inequalities(suite, grid, partition, config.verify_fields, config.r)
    write_report_csv(output_path(config, config.report_csv), suite.reports)

    if suite.failures:
        log.error(f"Verification failed: {', '.join(suite.failures)}")
        return EXIT_FAILURE
    log.info(f"All checks passed ({len(suite.reports)} report rows).")
    return EXIT_OK


def parse_sweep_param(text: str) -> Tuple[str, List]:
    """``key=start:stop:step`` with stop included."""
    try:
        key, span = text.split("=", 1)
        start, stop, step = (float(v) for v in span.split(":"))
    except ValueError:
        raise ConfigError(f"sweep parameter {text!r} must look like key=start:stop:step") from None
    key = key.strip()
    if key not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {key!r}; choose one of {', '.join(SWEEPABLE)}")
    if step <= 0 or stop < start:
        raise ConfigError(f"empty sweep range {span!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    cast = SWEEPABLE[key]
    values = [cast(round(start + i * step, 12)) for i in range(count)]
    return key, values


def _sweep_config(config: RunConfig, key: str, value) -> RunConfig:
    out_dir = os.path.join(config.output_dir, "sweep", f"{key}={value}")
    return config._replace(**{key: value, "output_dir": out_dir})


def _run_member(config: RunConfig, workers: int):
    with fft.set_workers(workers):
        result = simulate(config)
    return result, _summarize(config, result)


def cmd_sweep(config: RunConfig, param: str) -> int:
    """Simulate over a parameter range; r sweeps re-weight a single trajectory."""
    try:
        key, values = parse_sweep_param(param)
        ensure_dir(config.output_dir)
        configs = [_sweep_config(config, key, v) for v in values]
        for c in configs:
            validate_solver_config(to_solver_config(c))
    except ConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_FAILURE
    log.info(f"Sweeping {key} over {values}.")

    rows = []
    codes = []
    try:
        if key == "r":
            base, _ = _run_member(configs[0], fft_workers())
            for c, value in zip(configs, values):
                ensure_dir(c.output_dir)
                result = base._replace(records=reweight(base.records, value))
                write_monitor_csv(output_path(c, c.monitor_csv), result.records)
                write_checkpoint(output_path(c, c.checkpoint), result.state, c.dt)
                rows.append([key, value, result.status] + _summarize(c, result))
                codes.append(_status_code(result.status))
        else:
            pool_size, member_workers = split_workers(fft_workers(), len(configs))
            with ThreadPoolExecutor(max_workers=pool_size) as pool:
                outcomes = list(pool.map(lambda c: _run_member(c, member_workers), configs))
            for value, (result, summary) in zip(values, outcomes):
                rows.append([key, value, result.status] + summary)
                codes.append(_status_code(result.status))
    except ConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_FAILURE

    save_sweep_summary(output_path(config, "sweep_summary.xlsx"), rows)
    return max(codes) if codes else EXIT_OK
