import subprocess
import sys
import textwrap

import pytest

from equatorflow.cli import EXIT_ERROR, EXIT_OK, EXIT_UNDECIDED, main
from equatorflow.export import parse_flow_report


def _config(tmp_path, xi_max=5.0, extra=""):
    p = tmp_path / "c.yaml"
    p.write_text(textwrap.dedent(f"""\
        profile: {{catalog: linear}}
        grid: {{m: 151}}
        sweep: {{xi_min: -{xi_max}, xi_max: {xi_max}, delta_xi: 0.1, E_window: [0.05, 5.0]}}
        alpha: [0.5]
        output: {{dir: out, svg: false}}
        """) + extra)
    return p


def test_run_writes_outputs(tmp_path, capsys):
    cfg = _config(tmp_path)
    assert main(["run", "--config", str(cfg), "-q", "--alpha", "0.5", "1.5", "--out", str(tmp_path / "o")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "alpha=0.5 sf_measured=2 sf_thm=2 sf_bec=2" in out
    assert "alpha=1.5 sf_measured=2" in out
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert files == ["branches.csv", "fibers.csv", "flow_report.txt", "provenance.json"]
    rep = parse_flow_report((tmp_path / "o" / "flow_report.txt").read_text())
    assert sorted(rep) == [0.5, 1.5]


def test_run_undecided_exit_code(tmp_path, capsys):
    cfg = _config(tmp_path, xi_max=1.0)
    assert main(["run", "--config", str(cfg), "-q"]) == EXIT_UNDECIDED
    assert "sf_measured=undecided" in capsys.readouterr().out
    assert (tmp_path / "out" / "flow_report.txt").exists()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _config(tmp_path, extra="grid_typo: 1\n")
    assert main(["run", "--config", str(cfg)]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "line 6" in err and "grid_typo" in err
    assert main(["run", "--config", str(tmp_path / "none.yaml")]) == EXIT_ERROR


def test_selftest(tmp_path, capsys):
    cfg = _config(tmp_path, xi_max=1.0)
    assert main(["selftest", "--config", str(cfg)]) == EXIT_OK
    assert "selftest passed" in capsys.readouterr().out
    bad = _config(tmp_path, xi_max=1.0, extra="")
    bad.write_text(bad.read_text().replace("grid: {m: 151}", "grid: {m: 151, scheme: forward}"))
    assert main(["selftest", "--config", str(bad)]) == EXIT_UNDECIDED


def test_oracle_jump(capsys):
    assert main(["oracle", "jump", "--f-plus", "1", "--f-minus", "-1", "--xi", "-8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "E = 1\n" in out and "kappa_plus = 8" in out
    assert main(["oracle", "jump", "--f-plus", "1", "--f-minus", "-1", "--xi", "8"]) == EXIT_OK
    assert "no admissible interface mode" in capsys.readouterr().out


@pytest.mark.parametrize("slope, xi0", [("1", "-0.7071067812"), ("2", "-1"), ("4", "-1.414213562")])
def test_oracle_yanai(capsys, slope, xi0):
    assert main(["oracle", "yanai", "--profile", "linear", "--param", f"slope={slope}"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"xi0 = {xi0}"


def test_oracle_kelvin(capsys):
    assert main(["oracle", "kelvin", "--xi", "2", "--m", "201"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "E = 2\n" in out and "discrete_residual" in out


def test_oracle_bad_profile(capsys):
    assert main(["oracle", "yanai", "--profile", "nope"]) == EXIT_ERROR
    assert "unknown profile" in capsys.readouterr().err
    assert main(["oracle", "yanai", "--param", "slope"]) == EXIT_ERROR


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "equatorflow.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("equatorflow ")
