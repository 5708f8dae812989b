import csv
import logging
import os
import struct
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from openpyxl import Workbook, load_workbook

from mpdns.errors import ConfigError
from mpdns.inequalities import InequalityReport, format_params
from mpdns.monitor import CSV_HEADER, MonitorRecord, csv_row
from mpdns.solver import SimState
from mpdns.spectral import SpectralVectorField, forward, inverse, leray_coeffs, make_grid

log = logging.getLogger(__name__)

MAGIC = b"MPDNS1"
HEADER_FORMAT = "<6sqdd"
REPORT_HEADER = ["lemma", "params", "seed", "lhs", "rhs", "ratio"]
SWEEP_HEADER = [
    "Parameter", "Value", "Status", "Final t", "Criterion integral", "Sup grad sq",
    "ln Y(T)", "Max energy residual", "Energy non-increasing",
]


def fmt(value) -> str:
    """Full precision decimal for CSV cells."""
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def ensure_dir(path: str):
    """Create a directory for outputs, reporting an unusable location as a config error."""
    if not path:
        return
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as err:
        log.exception(f"Couldn't create output directory {path}!")
        raise ConfigError(f"output directory {path} is not writable: {err}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


def write_checkpoint(path: str, state: SimState, dt: float):
    """Binary checkpoint: header, then u1,u2,u3,w1,w2,w3 in physical space, x1 fastest."""
    grid = state.u.grid
    fields = np.concatenate([inverse(state.u.coeffs), inverse(state.omega.coeffs)])
    with open(path, "wb") as fh:
        fh.write(struct.pack(HEADER_FORMAT, MAGIC, grid.n, float(state.t), float(dt)))
        for field in fields:
            fh.write(np.asarray(field, dtype="<f8").tobytes(order="F"))
    log.info(f"Checkpoint at t={state.t:.6g} saved to {path}.")


def read_checkpoint(path: str) -> Tuple[SimState, float]:
    with open(path, "rb") as fh:
        data = fh.read()
    header_size = struct.calcsize(HEADER_FORMAT)
    magic, n, t, dt = struct.unpack(HEADER_FORMAT, data[:header_size])
    if magic != MAGIC:
        raise ValueError(f"{path} is not a checkpoint (magic {magic!r})")
    grid = make_grid(n)
    expected = header_size + 6 * n ** 3 * 8
    if len(data) != expected:
        raise ValueError(f"{path} has {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=header_size)
    fields = flat.reshape((6, n ** 3)).astype(float)
    fields = np.stack([f.reshape(grid.shape, order="F") for f in fields])
    u_hat = leray_coeffs(forward(fields[:3]) * grid.dealias_mask, grid)
    w_hat = forward(fields[3:]) * grid.dealias_mask
    log.info(f"Checkpoint loaded from {path}: n={n}, t={t:.6g}.")
    return SimState(SpectralVectorField(grid, u_hat, solenoidal=True),
                    SpectralVectorField(grid, w_hat), t), dt


class MonitorCsvWriter:
    """Writes monitor records as they arrive so an interrupted run leaves a valid prefix."""
    def __init__(self, path: str):
        self.path = path
        self.fh = None
        self.writer = None
        self.rows = 0

    def __enter__(self):
        self.fh = open(self.path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(CSV_HEADER)
        return self

    def __call__(self, record: MonitorRecord):
        self.writer.writerow([fmt(v) for v in csv_row(record)])
        self.fh.flush()
        self.rows += 1

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        log.info(f"Wrote {self.rows} monitor rows to {self.path}.")


def write_monitor_csv(path: str, records: Iterable[MonitorRecord]):
    with MonitorCsvWriter(path) as writer:
        for record in records:
            writer(record)


def read_monitor_csv(path: str) -> List[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return [{key: float(value) for key, value in row.items()} for row in csv.DictReader(fh)]


def write_report_csv(path: str, reports: Sequence[InequalityReport]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in reports:
            seed = "" if rep.seed is None else rep.seed
            writer.writerow([rep.lemma, format_params(rep.params), seed,
                             fmt(float(rep.lhs)), fmt(float(rep.rhs)), fmt(float(rep.ratio))])
    log.info(f"Wrote {len(reports)} report rows to {path}.")


def save_sweep_summary(path: str, rows: Sequence[list]):
    """Append sweep results to a workbook, creating it with a header if needed."""
    if os.path.exists(path):
        try:
            wb = load_workbook(path)
            for row in rows:
                wb.active.append(row)
            wb.save(filename=path)
            log.info(f"Sweep summary appended to existing {path}.")
            return
        except Exception:
            log.exception(f"Sweep summary couldn't be appended to {path}; writing a new one.")

    wb = Workbook()
    sheet = wb.active
    sheet.title = "sweep"
    sheet.append(SWEEP_HEADER)
    for row in rows:
        sheet.append(row)
    try:
        wb.save(filename=path)
        log.info(f"Sweep summary saved to new file {path}.")
    except OSError:
        log.exception(f"Sweep summary couldn't be saved to {path}!")
