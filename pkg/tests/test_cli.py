"""End-to-end checks of the command-line surface.

Commands run in-process through main(argv) so exit codes and streams
are observable; one subprocess test confirms the module entry point
wires up identically.
"""

import csv
import io
import math
import subprocess
import sys

import pytest

from hfl import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def test_no_arguments_prints_usage(capsys):
    code, _, err = run(capsys)
    assert code == 1
    assert "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, _ = run(capsys, "eigen", "--bogus")
    assert code == 1


def test_classify_discrete(capsys):
    code, out, _ = run(capsys, "classify", "--k", "0.5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "origin: exit; spectrum: discrete"
    assert lines[1].startswith("probe: I0 finite")
    assert lines[2] == "classifiers agree"


def test_classify_mixed_reports_cutoff(capsys):
    code, out, _ = run(capsys, "classify", "--k", "0", "--a", "1")
    assert code == 0
    assert out.splitlines()[0] == "origin: natural; spectrum: mixed; cutoff -0.03125"


def test_eigen_csv(capsys):
    code, out, _ = run(capsys, "eigen", "--n", "4")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["n", "lambda", "c_n", "residual"]
    assert len(rows) == 4
    lam1 = float(rows[0][1])
    assert abs(lam1 + 2.1609637797753494) < 1e-12
    assert all(abs(float(r[3])) < 1e-12 for r in rows)


def test_eigen_rejects_wrong_k(capsys):
    code, _, err = run(capsys, "eigen", "--k", "-0.5")
    assert code == 1
    assert "requires k=1/2" in err


def test_density_csv(capsys):
    code, out, _ = run(capsys, "density", "--k", "0.5", "--n", "12",
                       "--x", "0.5", "--T", "0.2", "--grid", "20")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["y", "gamma"]
    assert len(rows) == 20
    assert float(rows[-1][0]) == 1.0
    assert all(float(r[1]) > -1e-9 for r in rows)
    assert max(float(r[1]) for r in rows) > 0.5


def test_bond_csv(capsys):
    code, out, _ = run(capsys, "bond", "--k", "0.5", "--n", "12",
                       "--x", "0.5", "--maturities", "0.25")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["T", "B", "Y"]
    t, b, y = (float(v) for v in rows[0])
    assert t == 0.25
    assert math.exp(-0.25) < b < 1.0
    assert abs(y + math.log(b) / t) < 1e-12


def test_bond_truncation_maps_to_exit_2(capsys):
    code, _, err = run(capsys, "bond", "--k", "0.5", "--n", "1",
                       "--x", "0.5", "--maturities", "1.0")
    assert code == 2
    assert "inconsistency" in err


def test_yield_continuous_csv(capsys):
    code, out, _ = run(capsys, "yield", "--k", "-0.5", "--x", "0.6",
                       "--maturities", "0.25,0.5")
    assert code == 0
    _, rows = parse_csv(out)
    assert [float(r[0]) for r in rows] == [0.25, 0.5]
    for r in rows:
        t, b, y = (float(v) for v in r)
        assert abs(y + math.log(b) / t) < 1e-12


def test_price_put_csv(capsys):
    code, out, _ = run(capsys, "price", "--k", "0.5", "--n", "12",
                       "--payoff", "put-on-rate", "--strike", "0.5",
                       "--x", "0.5", "--T", "0.3")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["payoff", "strike", "x", "T", "price"]
    assert rows[0][0] == "put-on-rate"
    assert 0.0 < float(rows[0][4]) < 0.5


def test_price_strike_flag_consistency(capsys):
    code, _, err = run(capsys, "price", "--k", "0.5", "--payoff",
                       "put-on-rate", "--x", "0.5", "--T", "0.3")
    assert code == 1
    assert "strike" in err
    code, _, err = run(capsys, "price", "--k", "0.5", "--payoff", "one",
                       "--strike", "0.3", "--x", "0.5", "--T", "0.3")
    assert code == 1


def test_simulate_csv_deterministic(capsys):
    argv = ("simulate", "--k", "0.5", "--x0", "0.5", "--horizon", "0.1",
            "--n-paths", "2000", "--dt", "1e-3", "--seed", "4")
    code, first, _ = run(capsys, *argv)
    assert code == 0
    code, second, _ = run(capsys, *argv)
    assert first == second
    header, rows = parse_csv(first)
    row = dict(zip(header, rows[0]))
    assert row["measure"] == "base"
    assert int(row["n_paths"]) == 2000
    assert float(row["dt"]) == 1e-3
    assert 0.9 < float(row["price_mean"]) < 1.0


def test_simulate_dump(capsys, tmp_path):
    dump = tmp_path / "paths.csv"
    code, _, _ = run(capsys, "simulate", "--k", "0.5", "--x0", "0.5",
                     "--horizon", "0.1", "--n-paths", "50", "--dt", "1e-3",
                     "--seed", "4", "--dump", str(dump))
    assert code == 0
    header, rows = parse_csv(dump.read_text())
    assert header == ["path", "terminal", "status"]
    assert len(rows) == 50
    assert set(int(r[2]) for r in rows) <= {0, 1, 2}


def test_compare_measures_csv(capsys):
    code, out, _ = run(capsys, "compare-measures", "--k", "0.5", "--x0",
                       "0.5", "--horizon", "0.1", "--n-paths", "4000",
                       "--dt", "5e-4", "--seed", "2")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["price_base", "stderr_base", "price_transformed",
                      "stderr_transformed", "gap", "gap_stderr"]
    row = [float(v) for v in rows[0]]
    assert abs(row[4]) < 5.0 * row[5]


def test_out_file_instead_of_stdout(capsys, tmp_path):
    target = tmp_path / "eigen.csv"
    code, out, _ = run(capsys, "eigen", "--n", "2", "--out", str(target))
    assert code == 0
    assert out == ""
    text = target.read_text()
    assert text.startswith("n,lambda,c_n,residual")
    assert text.endswith("\n")


def test_plot_requires_out(capsys):
    code, _, err = run(capsys, "eigen", "--n", "2", "--plot")
    assert code == 1
    assert "--out" in err


def test_plot_writes_png(capsys, tmp_path):
    target = tmp_path / "eigen.csv"
    code, _, _ = run(capsys, "eigen", "--n", "2", "--out", str(target),
                     "--plot")
    assert code == 0
    png = tmp_path / "eigen.png"
    assert png.exists()
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_config_file_supplies_defaults(capsys, tmp_path):
    cfg = tmp_path / "hfl.cfg"
    cfg.write_text("# sample\nk = -0.5\nx0 = 0.6\n")
    code, out, _ = run(capsys, "classify", "--config", str(cfg))
    assert code == 0
    assert out.splitlines()[0] == "origin: natural; spectrum: continuous"


def test_flag_overrides_config(capsys, tmp_path):
    cfg = tmp_path / "hfl.cfg"
    cfg.write_text("k = -0.5\n")
    code, out, _ = run(capsys, "classify", "--config", str(cfg),
                       "--k", "0.5")
    assert code == 0
    assert out.splitlines()[0] == "origin: exit; spectrum: discrete"


def test_env_config(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "hfl.cfg"
    cfg.write_text("k = 0.5\n")
    monkeypatch.setenv("HFL_CONFIG", str(cfg))
    code, out, _ = run(capsys, "classify")
    assert code == 0
    assert "discrete" in out


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "hfl.cfg"
    cfg.write_text("k = 0.5\nflavor = mint\n")
    code, _, err = run(capsys, "classify", "--config", str(cfg))
    assert code == 1
    assert "flavor" in err
    assert "line 2" in err or ":2" in err


def test_preset_expansion(capsys, tmp_path):
    target = tmp_path / "fig.csv"
    code, _, _ = run(capsys, "--preset", "fig-eigen", "--out", str(target))
    assert code == 0
    _, rows = parse_csv(target.read_text())
    assert len(rows) == 4


def test_preset_flag_override(capsys):
    # Flags after the preset win over the bundled ones.
    code, out, _ = run(capsys, "--preset", "fig-eigen", "--n", "2")
    assert code == 0
    _, rows = parse_csv(out)
    assert len(rows) == 2


def test_unknown_preset(capsys):
    code, _, err = run(capsys, "--preset", "fig-nope")
    assert code == 1
    assert "unknown preset" in err


def test_module_entry_point_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "hfl.cli", "eigen", "--n", "2"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("n,lambda")
