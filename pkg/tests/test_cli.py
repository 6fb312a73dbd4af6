import csv
import math

import pytest
from hypothesis import given, settings, strategies as st

from antflow.cli import ConfigError, RunConfig, main, parse_values
from antflow.dynamics import ModelParams, new_state
from antflow.observables import FdTable
from antflow.synthetic import simulated_log


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("ANTFLOW_SEED", raising=False)


SIM = ["simulate", "--mode", "uni", "--L", "500", "--rho", "0.2", "--Q", "0.9",
       "--q", "0.2", "--f", "0.001", "--seed", "7", "--warmup", "200", "--sweeps", "100"]


class TestSimulate:
    def test_outputs(self, tmp_path):
        assert main(SIM + ["--out", "a"]) == 0
        for name in ("raster.pgm", "raster.csv", "summary.csv"):
            assert (tmp_path / "a" / name).stat().st_size > 0
        (pt,) = FdTable.from_csv(open(tmp_path / "a" / "summary.csv"))
        assert pt.rho_R == 0.2 and pt.f == 0.001

    def test_byte_identical(self, tmp_path):
        main(SIM + ["--out", "a"])
        main(SIM + ["--out", "b"])
        for name in ("raster.pgm", "raster.csv", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_density(self, capsys):
        assert main(["simulate", "--rho", "1.5"]) == 2
        assert "rho" in capsys.readouterr().err

    def test_bad_rates_name_key(self, capsys):
        assert main(["simulate", "--mode", "bi", "--rho", "0.1", "--K", "0.5"]) == 2
        assert "K" in capsys.readouterr().err

    def test_env_seed(self, tmp_path, monkeypatch):
        base = SIM[:SIM.index("--seed")] + SIM[SIM.index("--seed") + 2:]
        monkeypatch.setenv("ANTFLOW_SEED", "7")
        main(base + ["--out", "env"])
        main(SIM + ["--out", "flag"])
        assert ((tmp_path / "env" / "raster.pgm").read_bytes()
                == (tmp_path / "flag" / "raster.pgm").read_bytes())

    def test_section_export_analyzes(self, tmp_path):
        args = ["simulate", "--mode", "bi", "--L", "200", "--rho-R", "0.1", "--rho-L",
                "0.05", "--f", "0.01", "--sweeps", "2000", "--record-interval", "0",
                "--section", "40:52", "--out", "s"]
        assert main(args) == 0
        assert main(["analyze", "s/events.csv", "--section-length", "12", "--out", "an"]) == 0
        assert (tmp_path / "an" / "metrics.csv").exists()

    def test_unwritable_output(self, tmp_path):
        (tmp_path / "blocker").write_text("")
        assert main(SIM + ["--out", "blocker/sub"]) == 1


class TestSweep:
    ARGS = ["sweep", "--mode", "uni", "--L", "100", "--rho", "0.1:0.3:0.1",
            "--f", "0.01", "--f", "0.002", "--warmup", "50", "--sweeps", "100",
            "--replicas", "2"]

    def read(self, path):
        return list(FdTable.from_csv(open(path)))

    def test_rows_sorted(self, tmp_path):
        assert main(self.ARGS + ["--out", "fd.csv"]) == 0
        rows = self.read(tmp_path / "fd.csv")
        keys = [(p.f, p.rho_L, p.rho_R) for p in rows]
        assert len(rows) == 6 and keys == sorted(keys)

    def test_resume_matches_full_run(self, tmp_path):
        main(self.ARGS + ["--out", "full.csv"])
        lines = (tmp_path / "full.csv").read_text().splitlines(keepends=True)
        (tmp_path / "part.csv").write_text("".join(lines[:1] + lines[3:5]))
        assert main(self.ARGS + ["--out", "part.csv", "--resume"]) == 0
        assert (tmp_path / "part.csv").read_text() == (tmp_path / "full.csv").read_text()

    def test_workers_match(self, tmp_path):
        main(self.ARGS + ["--out", "w1.csv"])
        main(self.ARGS + ["--out", "w2.csv", "--workers", "2"])
        assert (tmp_path / "w1.csv").read_text() == (tmp_path / "w2.csv").read_text()

    def test_empty_grid(self):
        assert main(["sweep", "--mode", "uni", "--L", "100"]) == 2

    def test_bi_grid_product(self, tmp_path):
        assert main(["sweep", "--mode", "bi", "--L", "50", "--rho-R", "0:0.2:0.1",
                     "--rho-L", "0:0.1:0.1", "--f", "0.01", "--warmup", "5",
                     "--sweeps", "5", "--out", "bi.csv"]) == 0
        assert len(self.read(tmp_path / "bi.csv")) == 6

    def test_tasep_grid_matches_exact(self, tmp_path):
        assert main(["sweep", "--mode", "tasep", "--L", "200", "--q", "0.9",
                     "--rho", "0.25", "--rho", "0.75", "--warmup", "500",
                     "--sweeps", "3000", "--replicas", "2", "--out", "t.csv"]) == 0
        for p in self.read(tmp_path / "t.csv"):
            assert math.isnan(p.f)
            assert abs(p.V_R - 0.9 * (1 - p.rho_R)) < 0.02

    def test_config_file_and_override(self, tmp_path):
        (tmp_path / "c.ini").write_text(
            "[antflow]\nmode = uni\nL = 60\nrho = 0.1 0.2\nf = 0.05\nsweeps = 20\nwarmup = 5\n")
        assert main(["sweep", "--config", "c.ini", "--out", "a.csv"]) == 0
        assert len(self.read(tmp_path / "a.csv")) == 2
        assert main(["sweep", "--config", "c.ini", "--rho", "0.5", "--out", "b.csv"]) == 0
        assert [p.rho_R for p in self.read(tmp_path / "b.csv")] == [0.5]

    def test_config_unknown_key(self, tmp_path, capsys):
        (tmp_path / "c.ini").write_text("[antflow]\nlattice = 60\n")
        assert main(["sweep", "--config", "c.ini"]) == 2
        assert "lattice" in capsys.readouterr().err


class TestAnalyze:
    def test_minimal(self, tmp_path):
        (tmp_path / "e.csv").write_text("t,direction,event\n1.0,R,enter\n3.0,R,leave\n")
        assert main(["analyze", "e.csv", "--section-length", "5", "--out", "o"]) == 0
        assert len((tmp_path / "o" / "metrics.csv").read_text().splitlines()) == 2
        assert (tmp_path / "o" / "uturn.csv").exists()

    def test_malformed_direction(self, tmp_path, capsys):
        (tmp_path / "e.csv").write_text("t,direction,event\n1.0,R,enter\n2.0,up,leave\n")
        assert main(["analyze", "e.csv", "--section-length", "5"]) == 3
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self):
        assert main(["analyze", "nope.csv", "--section-length", "5"]) == 1

    def test_simulated_velocities(self, tmp_path):
        state = new_state(ModelParams(L=200, q=0.2, Q=0.9, K=0.1, f=0.01), 25, 10, 2, "bi")
        log, truth = simulated_log(state, 2000, 20, 35, time_scale=0.5)
        with open(tmp_path / "e.csv", "w") as fh:
            log.to_csv(fh)
        assert main(["analyze", "e.csv", "--section-length", "15", "--out", "o"]) == 0
        rows = list(csv.DictReader(open(tmp_path / "o" / "metrics.csv")))
        want = sorted(15 / (b - a) for ps in truth.values() for a, b in ps)
        got = sorted(float(r["velocity"]) for r in rows)
        assert got == pytest.approx(want, rel=1e-9)


class TestValidate:
    def test_quick_passes(self, capsys):
        assert main(["validate", "--quick"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6 and "FAIL" not in out

    def test_injected_rate_error(self, capsys):
        assert main(["validate", "--quick", "--inject-rate-error", "0.2"]) == 4
        assert "FAIL" in capsys.readouterr().out


class TestRunConfig:
    def test_ranges(self):
        assert parse_values("rho", "0.1:0.9:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                                      0.8, 0.9]
        assert parse_values("f", "0, 1") == [0.0, 1.0]
        with pytest.raises(ConfigError):
            parse_values("rho", "a:b")

    def test_grid_order(self):
        cfg = RunConfig(mode="bi", rho_R=[0.2, 0.1], rho_L=[0.1, 0.0], f=[0.08, 0.002])
        grid = cfg.grid()
        assert grid == sorted(grid, key=lambda c: (c[2], c[1], c[0])) and len(grid) == 8

    @settings(max_examples=50, deadline=None)
    @given(mode=st.sampled_from(["tasep", "uni", "bi"]), L=st.integers(2, 10**5),
           f=st.lists(st.floats(0, 1), min_size=1, max_size=4),
           rho=st.lists(st.floats(0, 1), max_size=4), seed=st.integers(0, 2**63),
           warmup=st.none() | st.integers(0, 10**6), out=st.text("abc_/.", max_size=10))
    def test_roundtrip(self, mode, L, f, rho, seed, warmup, out):
        cfg = RunConfig(mode=mode, L=L, f=f, rho=rho, seed=seed, warmup=warmup, out=out)
        assert RunConfig.from_ini(cfg.to_ini()) == cfg
