import warnings
from pathlib import Path

import pytest

from levylab.cli import main
from levylab.config import parse_config
from levylab.errors import LevyLabError
from levylab.suites import run_suite

warnings.filterwarnings("ignore", message="rank-deficient regression design")

SMALL = """
[levy]
atoms = 0.3:2.0, -0.2:1.0

[grid]
horizon = 1.0
n_steps = 40

[problem]
name = example51

[solver]
n_paths = 1500
seed = 31415
outer_b_samples = 3

[fd]
n_space = 80
n_time = 80

[suite]
checks = all
"""


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_run_suite_orthonormality_only():
    cfg = parse_config("[levy]\natoms = 1.0:1.0\n[solver]\nn_paths = 5000\nseed = 3\n"
                       "[grid]\nn_steps = 20\n[suite]\nchecks = orthonormality\n")
    report = run_suite(cfg)
    assert {r.suite for r in report.rows} == {"orthonormality"}
    assert report.passed
    # one row group per selected suite, each check name unique
    names = [(r.suite, r.check) for r in report.rows]
    assert len(names) == len(set(names))


def test_run_suite_full_small(small_config):
    report = run_suite(parse_config(small_config.read_text()))
    suites = {r.suite for r in report.rows}
    assert suites == {
        "orthonormality",
        "skorokhod",
        "penalization",
        "comparison",
        "uniqueness",
        "feynman_kac",
    }
    failing = [r for r in report.rows if r.status != "pass"]
    assert not failing, f"failing checks: {failing}"


def test_comparison_suite_requires_pure_jump():
    cfg = parse_config("[levy]\natoms = 1.0:1.0\nsigma = 0.5\n[suite]\nchecks = comparison\n")
    with pytest.raises(LevyLabError):
        run_suite(cfg)


def test_summary_csv_is_reproducible(small_config, tmp_path):
    cfg = parse_config(small_config.read_text())
    texts = []
    for _ in range(2):
        report = run_suite(cfg)
        texts.append(report.to_summary_csv())
    assert texts[0] == texts[1]
    assert "runtime" not in texts[0].splitlines()[0]


class TestCli:
    def test_basis_writes_csv(self, small_config, tmp_path, capsys):
        out = tmp_path / "o"
        rc = main(["basis", "--config", str(small_config), "--out", str(out)])
        assert rc == 0
        text = (out / "basis.csv").read_text()
        assert text.splitlines()[1] == "i,k,c_ik"
        assert "rank=2" in text.splitlines()[0]

    def test_simulate_writes_path_files(self, small_config, tmp_path):
        out = tmp_path / "sim"
        rc = main(["simulate", "--config", str(small_config), "--out", str(out), "--paths", "5"])
        assert rc == 0
        for name in ("paths.csv", "jumps.csv", "teugels.csv"):
            assert (out / name).exists()
        header = (out / "paths.csv").read_text().splitlines()[0]
        assert header == "path,node,t,B,L,X,eta_abs,A"

    def test_solve_summary(self, small_config, tmp_path, capsys):
        out = tmp_path / "solve"
        rc = main(["solve", "--config", str(small_config), "--out", str(out)])
        assert rc == 0
        lines = (out / "solve_summary.csv").read_text().splitlines()
        assert lines[0] == "penalization,y0_mean,y0_se,k_t_mean,skorokhod_residual,penetration_norm"
        assert lines[1].startswith("projection,")

    def test_solve_trajectories_flag(self, small_config, tmp_path):
        out = tmp_path / "traj"
        rc = main(["solve", "--config", str(small_config), "--out", str(out),
                   "--trajectories", "--paths", "500"])
        assert rc == 0
        lines = (out / "trajectories.csv").read_text().splitlines()
        assert lines[0].startswith("path,node,t,Y,K,Z1")
        assert len(lines) > 41  # at least one full path of 41 nodes

    def test_bad_problem_param_is_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[problem]\nname = example51\nparam.bogus = 1\n")
        rc = main(["basis", "--config", str(bad)])
        assert rc == 1
        assert "bogus" in capsys.readouterr().err

    def test_solve_schedule_rows(self, small_config, tmp_path):
        out = tmp_path / "sched"
        rc = main(["solve", "--config", str(small_config), "--out", str(out), "--schedule",
                   "--paths", "800"])
        assert rc == 0
        lines = (out / "solve_summary.csv").read_text().splitlines()
        assert len(lines) == 5  # header + the four schedule entries
        assert lines[1].split(",")[0] == "4"

    def test_verify_runs_orthonormality(self, small_config, tmp_path):
        out = tmp_path / "verify"
        rc = main(["verify", "--config", str(small_config), "--out", str(out)])
        assert rc == 0
        text = (out / "summary.csv").read_text()
        assert "orthonormality,gram_defect,pass" in text

    def test_crosscheck_writes_reports(self, small_config, tmp_path, capsys):
        out = tmp_path / "cross"
        rc = main(["crosscheck", "--config", str(small_config), "--out", str(out)])
        assert rc == 0
        assert (out / "u_grid.csv").exists()
        fk = (out / "fk_report.csv").read_text()
        assert "y0_gap" in fk
        assert "jump_weight_ratio_atom1" in fk
        assert "deterministic" in fk  # mode note in the report header rows

    def test_suite_exit_code_and_outputs(self, small_config, tmp_path):
        out = tmp_path / "suite"
        rc = main(["suite", "--config", str(small_config), "--out", str(out)])
        assert rc == 0
        assert (out / "summary.csv").exists()
        assert (out / "report.txt").exists()

    def test_unknown_coefficient_is_an_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[problem]\nname = examle51\n")
        rc = main(["basis", "--config", str(bad)])
        assert rc == 1
        assert "examle51" in capsys.readouterr().err

    def test_config_parse_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[grid]\nn_steps = 0\n")
        rc = main(["basis", "--config", str(bad)])
        assert rc == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_file(self, capsys):
        rc = main(["basis", "--config", "does/not/exist.cfg"])
        assert rc == 1


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("example51.cfg", "quick_suite.cfg", "orthonormality.cfg"):
        cfg = parse_config((root / name).read_text())
        assert cfg.grid.n_steps >= 1
