import math

import numpy as np
import pytest

import splitsolve as ss
from splitsolve.harness import ConvergenceReport, ConvergenceRow


def report_from_errors(deltas, errors, solver="splitting"):
    rows = tuple(ConvergenceRow(d, 1.0 + e, e, e, 0.01)
                 for d, e in zip(deltas, errors))
    return ConvergenceReport(solver, (0.0, 5.0), "exact", 1.0, rows)


class TestEstimateRate:
    def test_exact_linear_decay(self):
        deltas = [0.1, 0.05, 0.025]
        rep = report_from_errors(deltas, [0.3 * d for d in deltas])
        assert ss.estimate_rate(rep) == pytest.approx(1.0, abs=1e-12)

    def test_exact_sqrt_decay(self):
        deltas = [0.1, 0.05, 0.025, 0.0125]
        rep = report_from_errors(deltas, [math.sqrt(d) for d in deltas])
        assert ss.estimate_rate(rep) == pytest.approx(0.5, abs=1e-12)

    def test_reported_table_rates(self):
        # least squares on the published error sequence by hand:
        # slope = sum(dx*dy)/sum(dx^2) on log-log points
        deltas = np.array([0.1, 0.05, 0.025, 0.01])
        errors = np.array([0.056, 0.032, 0.02, 0.012]) / 100.0
        dx = np.log(deltas) - np.log(deltas).mean()
        dy = np.log(errors) - np.log(errors).mean()
        oracle = float(np.sum(dx * dy) / np.sum(dx * dx))
        rep = report_from_errors(deltas, errors)
        assert ss.estimate_rate(rep) == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.67, abs=0.01)

    def test_scale_invariance(self):
        deltas = [0.1, 0.05, 0.025]
        errors = [3e-3, 1.1e-3, 6e-4]
        a = ss.estimate_rate(report_from_errors(deltas, errors))
        b = ss.estimate_rate(report_from_errors(deltas,
                                                [17.0 * e for e in errors]))
        assert a == pytest.approx(b, abs=1e-12)

    def test_zero_rows_excluded_then_degenerate(self):
        rep = report_from_errors([0.1, 0.05], [0.0, 0.0])
        with pytest.raises(ss.DegenerateFit):
            ss.estimate_rate(rep)
        rep2 = report_from_errors([0.1, 0.05, 0.025], [1e-3, 0.0, 2.5e-4])
        assert math.isfinite(ss.estimate_rate(rep2))


@pytest.fixture(scope="module")
def tiny_setup(cole_hopf):
    xs = ss.uniform_grid(-8, 12, 0.1)
    cfg = ss.OperatorConfig(delta=0.25)
    return cole_hopf, xs, cfg


class TestRunConvergence:
    def test_exact_reference_for_benchmark(self, tiny_setup):
        prob, xs, cfg = tiny_setup
        rep = ss.run_convergence(prob, xs, [0.5, 0.25], (0.0, 5.0),
                                 cfg=cfg)
        assert rep.reference == "exact"
        assert rep.reference_value == pytest.approx(4.364941092414899)
        assert [r.delta for r in rep.rows] == [0.5, 0.25]
        assert all(r.status == "ok" for r in rep.rows)
        assert all(r.seconds >= 0 for r in rep.rows)
        assert rep.rows[0].abs_error > rep.rows[1].abs_error

    def test_finest_reference_otherwise(self, zero_diffusion_abs):
        xs = ss.uniform_grid(-10, 10, 0.1)
        rep = ss.run_convergence(zero_diffusion_abs, xs, [0.5, 0.25],
                                 (0.0, 2.0), cfg=ss.OperatorConfig(delta=0.25))
        assert rep.reference == "finest"
        finest = [r for r in rep.rows if r.delta == 0.25][0]
        assert finest.abs_error == pytest.approx(0.0, abs=1e-12)
        assert 0.25 in rep.excluded

    def test_failed_rows_marked_not_dropped(self, tiny_setup):
        prob, xs, cfg = tiny_setup
        rep = ss.run_convergence(prob, xs, [0.25, 0.3], (0.0, 5.0), cfg=cfg)
        bad = [r for r in rep.rows if r.delta == 0.3][0]
        assert bad.status.startswith("error:")
        assert math.isnan(bad.value)
        assert len(rep.rows) == 2

    def test_thread_counts_agree(self, tiny_setup):
        prob, xs, cfg = tiny_setup
        rep1 = ss.run_convergence(prob, xs, [0.5, 0.25], (0.0, 5.0),
                                  cfg=cfg, threads=1)
        rep2 = ss.run_convergence(prob, xs, [0.5, 0.25], (0.0, 5.0),
                                  cfg=cfg, threads=2)
        for a, b in zip(rep1.rows, rep2.rows):
            assert a.value == b.value
            assert a.abs_error == b.abs_error


class TestCompare:
    def test_winner_per_delta(self, tiny_setup):
        prob, xs, cfg = tiny_setup
        paired = ss.compare_schemes(prob, xs, [0.5, 0.25], (0.0, 5.0),
                                    cfg=cfg)
        assert len(paired.smaller_error) == 2
        assert set(paired.smaller_error) <= {"splitting", "howard", "tie"}
        assert paired.splitting.reference_value \
            == paired.howard.reference_value

    def test_constant_problem_ties_at_zero(self, cole_hopf):
        import dataclasses
        prob = dataclasses.replace(
            cole_hopf,
            terminal=ss.TerminalDatum(
                eval=lambda x: np.full_like(np.asarray(x, float), 2.0),
                lip_const=0.0))
        xs = ss.uniform_grid(-5, 5, 0.2)
        paired = ss.compare_schemes(prob, xs, [0.5], (0.0, 1.0),
                                    cfg=ss.OperatorConfig(delta=0.5),
                                    reference="finest")
        assert paired.smaller_error == ("tie",)


class TestEmit:
    def test_csv_schema_and_determinism(self, tiny_setup, tmp_path):
        prob, xs, cfg = tiny_setup
        rep = ss.run_convergence(prob, xs, [0.5, 0.25], (0.0, 5.0), cfg=cfg)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        ss.emit_report(rep, d1, ("csv",))
        ss.emit_report(rep, d2, ("csv",))
        lines1 = (d1 / "convergence.csv").read_text().splitlines()
        lines2 = (d2 / "convergence.csv").read_text().splitlines()
        assert lines1[0] == "delta,value,abs_error,rel_error,seconds"
        assert len(lines1) == 3
        # identical up to the wall-clock column
        strip = lambda lines: [",".join(l.split(",")[:4]) for l in lines]
        assert strip(lines1) == strip(lines2)

    def test_empty_rows_header_only_no_svg(self, tmp_path):
        rep = ConvergenceReport("splitting", (0.0, 5.0), "exact", 1.0, ())
        written = ss.emit_report(rep, tmp_path / "out", ("csv", "svg"))
        csv = (tmp_path / "out" / "convergence.csv").read_text()
        assert csv == "delta,value,abs_error,rel_error,seconds\n"
        assert not (tmp_path / "out" / "convergence.svg").exists()
        assert len(written) == 1

    def test_two_solver_svg_has_two_polylines_and_legend(self, tiny_setup,
                                                         tmp_path):
        prob, xs, cfg = tiny_setup
        paired = ss.compare_schemes(prob, xs, [0.5, 0.25], (0.0, 5.0),
                                    cfg=cfg)
        ss.emit_report(paired, tmp_path, ("csv", "svg"))
        svg = (tmp_path / "convergence.svg").read_text()
        assert svg.count("<polyline") == 2
        assert "splitting" in svg and "howard" in svg
        assert 'width="800" height="600"' in svg
        assert "1e-" in svg  # decade tick labels

    def test_solution_svg(self, tmp_path):
        xs = np.linspace(0, 1, 11)
        ss.emit_solution_svg([("layer", xs, np.sin(xs))],
                             tmp_path / "solution.svg")
        svg = (tmp_path / "solution.svg").read_text()
        assert svg.count("<polyline") == 1
        assert "</svg>" in svg

    def test_io_error(self, tiny_setup, tmp_path):
        prob, xs, cfg = tiny_setup
        rep = ss.run_convergence(prob, xs, [0.5], (0.0, 5.0), cfg=cfg)
        blocker = tmp_path / "blocked"
        blocker.write_text("file, not a directory")
        with pytest.raises(ss.IoError):
            ss.emit_report(rep, blocker, ("csv",))
