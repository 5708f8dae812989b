import struct

import numpy as np
import pytest
from openpyxl import load_workbook

from mpdns.inequalities import InequalityReport
from mpdns.monitor import CSV_HEADER
from mpdns.save import (HEADER_FORMAT, MAGIC, ensure_dir, read_checkpoint, read_monitor_csv,
                        save_sweep_summary, write_checkpoint, write_monitor_csv, write_report_csv)
from mpdns.solver import SolverConfig, random_init, run, taylor_green_init


class TestCheckpoint:
    def test_roundtrip(self, grid8, tmp_path):
        state = random_init(grid8, 2)._replace(t=0.25)
        path = str(tmp_path / "state.chk")
        write_checkpoint(path, state, 0.01)
        loaded, dt = read_checkpoint(path)
        assert dt == 0.01
        assert loaded.t == 0.25
        assert loaded.u.grid == grid8
        assert np.abs(loaded.u.coeffs - state.u.coeffs).max() < 1e-14
        assert np.abs(loaded.omega.coeffs - state.omega.coeffs).max() < 1e-14

    def test_layout(self, grid8, tmp_path):
        path = tmp_path / "state.chk"
        write_checkpoint(str(path), taylor_green_init(grid8), 0.1)
        data = path.read_bytes()
        header = struct.calcsize(HEADER_FORMAT)
        assert len(data) == header + 6 * 8 ** 3 * 8
        magic, n, t, dt = struct.unpack(HEADER_FORMAT, data[:header])
        assert (magic, n, t, dt) == (MAGIC, 8, 0.0, 0.1)
        u1 = np.frombuffer(data, dtype="<f8", count=8, offset=header)
        x = np.arange(8) * 2 * np.pi / 8
        # x1 varies fastest; x2 = x3 = 0
        assert np.allclose(u1, np.sin(x), atol=1e-14)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.chk"
        path.write_bytes(struct.pack(HEADER_FORMAT, b"NOPE00", 8, 0.0, 0.1))
        with pytest.raises(ValueError, match="not a checkpoint"):
            read_checkpoint(str(path))

    def test_truncated(self, grid8, tmp_path):
        path = tmp_path / "short.chk"
        write_checkpoint(str(path), taylor_green_init(grid8), 0.1)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="expected"):
            read_checkpoint(str(path))


class TestCsv:
    def test_monitor_csv(self, grid8, tmp_path):
        result = run(SolverConfig(n=8, dt=0.1, t_end=0.3, monitor_stride=1), taylor_green_init(grid8))
        path = str(tmp_path / "monitor.csv")
        write_monitor_csv(path, result.records)
        with open(path, encoding="utf-8") as fh:
            assert fh.readline().strip() == ",".join(CSV_HEADER)
        rows = read_monitor_csv(path)
        assert len(rows) == 4
        for row, rec in zip(rows, result.records):
            assert row["t"] == rec.t
            assert row["grad_u_sq"] == rec.grad_u_sq
            assert row["lnY"] == pytest.approx(np.log(rec.Y), rel=1e-15)

    def test_report_csv(self, tmp_path):
        path = tmp_path / "report.csv"
        reports = [InequalityReport("embedding", {"r": 0.5, "p": 6.0}, 1.0, 4.0, 0.25, False, "random", 3),
                   InequalityReport("anisotropic", {"mu": 6.0}, 1.0, 2.0, 0.5, False, "sin_product", None)]
        write_report_csv(str(path), reports)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "lemma,params,seed,lhs,rhs,ratio"
        assert lines[1] == "embedding,r=0.5;p=6,3,1,4,0.25"
        assert lines[2] == "anisotropic,mu=6,,1,2,0.5"


class TestOutputs:
    def test_sweep_summary_appends(self, tmp_path):
        path = str(tmp_path / "sweep_summary.xlsx")
        save_sweep_summary(path, [["r", 0.25, "completed", 1.0, 0.1, 2.0, 3.0, 1e-9, True]])
        save_sweep_summary(path, [["r", 0.5, "completed", 1.0, 0.2, 2.0, 3.0, 1e-9, True]])
        sheet = load_workbook(path).active
        rows = list(sheet.values)
        assert len(rows) == 3
        assert rows[0][0] == "Parameter"
        assert rows[2][1] == 0.5

    def test_ensure_dir(self, tmp_path):
        target = tmp_path / "a" / "b"
        ensure_dir(str(target))
        assert target.is_dir()
