
import pytest

from splitsolve.cli import main

TINY_CFG = """
[problem]
name = "cole-hopf"
K = 2
T = 0.5

[grid]
x_min = -5
x_max = 7
h = 0.1

[scheme]
delta_list = 0.25, 0.125

[howard]
q_points = 101

[output]
formats = "csv", "svg"
"""


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    out_dir = tmp_path / "out"
    path.write_text(TINY_CFG + f'dir = "{out_dir}"\n')
    return path, out_dir


class TestSolveCommand:
    def test_exports_layers(self, tiny_config, capsys):
        cfg_path, out_dir = tiny_config
        assert main(["solve", "--config", str(cfg_path)]) == 0
        assert (out_dir / "layers.csv").exists()
        assert (out_dir / "layer_0000.csv").exists()
        assert (out_dir / "solution.svg").exists()
        assert "u(0, 1)" in capsys.readouterr().out

    def test_unwritable_out_dir_exits_1(self, tiny_config, tmp_path, capsys):
        cfg_path, _ = tiny_config
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        code = main(["solve", "--config", str(cfg_path), "--out",
                     str(blocker)])
        assert code == 1
        assert "IoError" in capsys.readouterr().err


class TestConvergenceCommand:
    def test_writes_report(self, tiny_config, capsys):
        cfg_path, out_dir = tiny_config
        assert main(["convergence", "--config", str(cfg_path)]) == 0
        csv = (out_dir / "convergence.csv").read_text().splitlines()
        assert csv[0] == "delta,value,abs_error,rel_error,seconds"
        assert len(csv) == 3
        out = capsys.readouterr().out
        assert "fitted log-log rate" in out

    def test_threads_flag_matches_serial(self, tiny_config):
        cfg_path, out_dir = tiny_config
        main(["convergence", "--config", str(cfg_path)])
        serial = (out_dir / "convergence.csv").read_text()
        main(["--threads", "2", "convergence", "--config", str(cfg_path)])
        threaded = (out_dir / "convergence.csv").read_text()
        strip = lambda text: [",".join(l.split(",")[:4])
                              for l in text.splitlines()]
        assert strip(serial) == strip(threaded)


class TestCompareCommand:
    def test_emits_paired_table(self, tiny_config, capsys):
        cfg_path, out_dir = tiny_config
        assert main(["compare", "--config", str(cfg_path)]) == 0
        csv = (out_dir / "convergence.csv").read_text().splitlines()
        assert len(csv) == 5  # header + 2 deltas x 2 solvers
        out = capsys.readouterr().out
        assert "smaller error" in out
        svg = (out_dir / "convergence.svg").read_text()
        assert svg.count("<polyline") == 2


class TestUsageAndErrors:
    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--bogus"])
        assert exc.value.code == 2

    def test_bad_config_exits_1(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("[problem]\nname = \"cole-hopf\"\n[grid]\nh = -1\n")
        assert main(["solve", "--config", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_help_documents_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        assert "--threads" in text and "--seed" in text
        assert "SPLITSOLVE_THREADS" in text

    def test_env_var_thread_fallback(self, tiny_config, monkeypatch):
        cfg_path, out_dir = tiny_config
        monkeypatch.setenv("SPLITSOLVE_THREADS", "2")
        assert main(["convergence", "--config", str(cfg_path)]) == 0

    def test_bad_env_var_is_runtime_error(self, tiny_config, monkeypatch,
                                          capsys):
        cfg_path, _ = tiny_config
        monkeypatch.setenv("SPLITSOLVE_THREADS", "many")
        assert main(["convergence", "--config", str(cfg_path)]) == 1
        capsys.readouterr()


class TestSelftest:
    def test_selftest_passes(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "all suites passed" in out
        for name in ("problem", "expectation", "backward", "scheme",
                     "baselines", "harness", "cli"):
            assert name in out
