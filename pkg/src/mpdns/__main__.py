import argparse
import logging
import os
import sys
import traceback
from logging.handlers import RotatingFileHandler
from unittest.mock import patch

from mpdns import __version__
from mpdns.commands import EXIT_FAILURE, cmd_simulate, cmd_sweep, cmd_verify
from mpdns.config import load_config
from mpdns.errors import ConfigError

# logging configuration
log = logging.getLogger("mpdns")
log.setLevel(logging.INFO)

# logging to std out
formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
ch = logging.StreamHandler(sys.stdout)
ch.setLevel(logging.INFO)
ch.setFormatter(formatter)
log.addHandler(ch)


def setup_file_logging(log_dir: str, level: int = logging.INFO):
    """Setup logging into the run's output directory."""
    log_path = os.path.join(log_dir, "mpdns.log")
    log.info(f"Log file location: {log_path}")

    if not os.path.exists(log_dir):
        try:
            os.makedirs(log_dir)
            log.info(f"Created log dir.")
        except PermissionError:
            log.exception(f"Could not create log dir.")

    try:
        fh = RotatingFileHandler(log_path, maxBytes=int(1e7), backupCount=5)
        fh.setLevel(level)
        fh.setFormatter(formatter)
        log.addHandler(fh)
        return fh
    except (PermissionError, FileNotFoundError):
        log.exception(f"Could not open log file.")
    return None


def excepthook(exc_type, exc_value, exc_tb):
    """Handle exceptions that don't occur in the main thread."""
    log.error("Exception outside main thread!")
    tb = "".join(traceback.format_exception(exc_type, exc_value, exc_tb))
    log.error(tb)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration error code."""
    def error(self, message):
        self.print_usage(sys.stderr)
        log.error(f"Usage error: {message}")
        sys.exit(EXIT_FAILURE)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="mpdns", description="Micropolar spectral DNS and Besov diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    for name, text in (("simulate", "advance the micropolar system and monitor it"),
                       ("verify", "check the Littlewood-Paley machinery and the inequalities"),
                       ("sweep", "repeat a simulation over a parameter range")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", help="key=value configuration file")
        cmd.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                         help="log at DEBUG level")
        if name == "sweep":
            cmd.add_argument("--param", required=True, help="key=start:stop:step, stop included")
    return parser


def run_command(args) -> int:
    try:
        config = load_config(args.config, args.command)
    except ConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_FAILURE

    level = logging.DEBUG if args.verbose else logging.INFO
    handler = setup_file_logging(config.output_dir, level)
    try:
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "verify":
            return cmd_verify(config)
        return cmd_sweep(config, args.param)
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        log.setLevel(logging.DEBUG)
        ch.setLevel(logging.DEBUG)

    log.info(f"mpdns {__version__}: {args.command}.")
    try:
        with patch('sys.excepthook', excepthook), patch('threading.excepthook', _thread_excepthook):
            code = run_command(args)
    except Exception:
        log.exception("Unexpected error!")
        code = EXIT_FAILURE
    log.info(f"Exit code {code}.")
    if argv is None:
        sys.exit(code)
    return code


def _thread_excepthook(hook_args):
    excepthook(hook_args.exc_type, hook_args.exc_value, hook_args.exc_traceback)


if __name__ == '__main__':
    main()
