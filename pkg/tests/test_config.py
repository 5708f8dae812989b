import pytest

from mpdns.config import DEFAULTS, load_config, output_path, parse_config, to_solver_config
from mpdns.errors import ConfigError


class TestParseConfig:
    def test_defaults(self):
        config = parse_config("")
        assert config == DEFAULTS
        assert config.n == 64
        assert config.r == 0.5
        assert config.init == "taylor_green"

    def test_values_and_comments(self):
        text = """
        # a small run
        n = 16
        dt=0.01   # step
        t_end = 0.5
        r=0.25
        init=random
        seed = 7
        omega = 1, 0, 0
        coupled = false
        output_dir = out/run1
        """
        config = parse_config(text, "simulate")
        assert config.n == 16
        assert config.dt == 0.01
        assert config.r == 0.25
        assert config.init == "random"
        assert config.seed == 7
        assert config.omega == (1.0, 0.0, 0.0)
        assert config.coupled is False
        assert output_path(config, "monitor.csv") == "out/run1/monitor.csv"

    def test_command(self):
        assert parse_config("", "verify").command == "verify"
        with pytest.raises(ConfigError):
            parse_config("", "plot")

    def test_exponent_out_of_range(self):
        with pytest.raises(ConfigError, match="0<r<1") as info:
            parse_config("n=16\nr=1.0\n")
        assert info.value.line == 2
        assert "line 2" in str(info.value)

    @pytest.mark.parametrize("text", ["n=12", "n=4", "dt=0", "monitor_stride=0", "init=vortex",
                                      "omega=1,2", "coupled=maybe", "verify_fields=-1", "size=3"])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("n=16\n\njust words\n")

    def test_checkpoint_needs_restart(self):
        with pytest.raises(ConfigError):
            parse_config("init=checkpoint")
        assert parse_config("init=checkpoint\nrestart=a.chk").restart == "a.chk"

    def test_repeated_key_warns(self, caplog):
        config = parse_config("n=16\nn=32")
        assert config.n == 32
        assert "set twice" in caplog.text

    def test_solver_config(self):
        solver = to_solver_config(parse_config("n=16\ndt=0.5\nmonitor_stride=2"))
        assert (solver.n, solver.dt, solver.monitor_stride) == (16, 0.5, 2)


class TestLoadConfig:
    def test_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n=8\nt_end=0.1\n", encoding="utf-8")
        config = load_config(str(path), "simulate")
        assert config.n == 8
        assert config.t_end == 0.1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.cfg"), "simulate")

    def test_no_file_gives_defaults(self):
        assert load_config(None, "verify") == DEFAULTS._replace(command="verify")
