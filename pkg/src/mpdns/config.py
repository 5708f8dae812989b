"""Line-based ``key=value`` run configuration."""
import logging
import os
from collections import namedtuple
from typing import Callable, Dict, Optional, Tuple

from mpdns.errors import ConfigError
from mpdns.solver import SolverConfig

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "verify", "sweep")
INITS = ("taylor_green", "constant_omega", "random", "checkpoint")

RunConfig = namedtuple("RunConfig", [
    "command", "n", "dt", "t_end", "r", "init", "seed", "monitor_stride", "spectrum_slope",
    "amplitude", "omega", "coupled", "verify_fields", "output_dir", "monitor_csv", "checkpoint",
    "report_csv", "restart",
])

DEFAULTS = RunConfig(
    command="simulate",
    n=64,
    dt=1e-3,
    t_end=1.0,
    r=0.5,
    init="taylor_green",
    seed=0,
    monitor_stride=10,
    spectrum_slope=-5.0 / 3.0,
    amplitude=1.0,
    omega=(0.0, 0.0, 1.0),
    coupled=True,
    verify_fields=100,
    output_dir="output",
    monitor_csv="monitor.csv",
    checkpoint="final.chk",
    report_csv="report.csv",
    restart="",
)


def _power_of_two(value: str) -> int:
    n = int(value)
    if n < 8 or n & (n - 1):
        raise ValueError(f"n={n} must be a power of two >= 8")
    return n


def _positive(value: str) -> float:
    x = float(value)
    if not x > 0:
        raise ValueError(f"{value} must be positive")
    return x


def _non_negative(value: str) -> float:
    x = float(value)
    if not x >= 0:
        raise ValueError(f"{value} must be non-negative")
    return x


def _exponent(value: str) -> float:
    r = float(value)
    if not 0 < r < 1:
        raise ValueError(f"r={r} violates 0<r<1")
    return r


def _init(value: str) -> str:
    if value not in INITS:
        raise ValueError(f"init must be one of {', '.join(INITS)}, got {value!r}")
    return value


def _stride(value: str) -> int:
    k = int(value)
    if k < 1:
        raise ValueError(f"{value} must be a positive integer")
    return k


def _vector(value: str) -> Tuple[float, float, float]:
    parts = [float(v) for v in value.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma separated numbers, got {value!r}")
    return tuple(parts)


def _boolean(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


PARSERS = {
    "n": _power_of_two,
    "dt": _positive,
    "t_end": _non_negative,
    "r": _exponent,
    "init": _init,
    "seed": int,
    "monitor_stride": _stride,
    "spectrum_slope": float,
    "amplitude": _non_negative,
    "omega": _vector,
    "coupled": _boolean,
    "verify_fields": _stride,
    "output_dir": str,
    "monitor_csv": str,
    "checkpoint": str,
    "report_csv": str,
    "restart": str,
}  # type: Dict[str, Callable]


def parse_value(key: str, value: str, line: Optional[int] = None):
    if key not in PARSERS:
        raise ConfigError(f"unknown key {key!r}", line)
    try:
        return PARSERS[key](value.strip())
    except ValueError as err:
        raise ConfigError(f"invalid value for {key}: {err}", line) from None


def parse_config(text: str, command: str = "simulate") -> RunConfig:
    """Parse a ``key=value`` document; unset keys keep their defaults."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = {"command": command}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line {raw!r}, expected key=value", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"malformed line {raw!r}, missing key", number)
        if key in values:
            log.warning(f"Config key {key!r} set twice; line {number} wins.")
        values[key] = parse_value(key, value, number)

    config = DEFAULTS._replace(**values)
    if config.init == "checkpoint" and not config.restart:
        raise ConfigError("init=checkpoint needs a restart path")
    log.info(f"Run configuration: {config}.")
    return config


def load_config(path: Optional[str], command: str) -> RunConfig:
    if path is None:
        return parse_config("", command)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text, command)


def to_solver_config(config: RunConfig) -> SolverConfig:
    return SolverConfig(n=config.n, dt=config.dt, t_end=config.t_end, r=config.r,
                        monitor_stride=config.monitor_stride, coupled=config.coupled)


def output_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)
