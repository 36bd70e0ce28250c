"""End-to-end tests of the command-line surface and report files."""

import json
import math

import numpy as np
import pytest

from cascadekit.cli import main

H07_TABLE = "moment_table_b2_H0.7.csv"


def read_meta(path):
    """Parse the leading '# key = value' metadata block of a CSV."""
    meta = {}
    for line in path.read_text().splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(" = ")
        meta[key] = value
    return meta


def read_rows(path):
    lines = [ln for ln in path.read_text().splitlines()
             if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def test_gaussian_stdout(capsys):
    assert main(["moments", "--gaussian", "--p", "4"]) == 0
    assert capsys.readouterr().out == "1, 3, 15, 105\n"


def test_sigma_stdout(capsys):
    assert main(["moments", "--sigma", "--b", "3", "--H", "0.5"]) == 0
    assert capsys.readouterr().out == "0.816497\n"


def test_moment_table_file(tmp_path):
    """Critical table lands in CSV with metadata; E(Z_4^2) = 3 exactly."""
    code = main(["moments", "--H", "0.5", "--n", "4", "--q", "2",
                 "--outdir", str(tmp_path)])
    assert code == 0
    table = tmp_path / "moment_table_b2_H0.5.csv"
    assert table.exists()
    meta = read_meta(table)
    assert meta["tool"] == "cascadekit"
    assert meta["H"] == "0.5"
    header, rows = read_rows(table)
    assert header == ["n", "q", "value", "flag"]
    val = next(float(r[2]) for r in rows if r[0] == "4" and r[1] == "2")
    assert math.isclose(val, 3.0, rel_tol=1e-12)
    # no limit table outside the convergent regime
    assert not (tmp_path / "limit_moments_b2_H0.5.csv").exists()


def test_limit_moments_written_when_convergent(tmp_path):
    assert main(["moments", "--n", "4", "--q", "4",
                 "--outdir", str(tmp_path)]) == 0
    assert (tmp_path / H07_TABLE).exists()
    lim = tmp_path / "limit_moments_b2_H0.7.csv"
    assert lim.exists()
    _, rows = read_rows(lim)
    q2 = next(float(r[1]) for r in rows if r[0] == "2")
    assert math.isclose(q2, 2.0649064800633348, rel_tol=1e-12)


def test_simulate_outputs_and_determinism(tmp_path):
    """Repeating one invocation reproduces both files byte for byte.

    The metadata block records the full effective config including the
    output directory, so the byte-level contract is per invocation; the
    data rows are directory-independent on top of that.
    """
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--depths", "8", "--seed", "3"]
    assert main(args + ["--outdir", str(a)]) == 0
    csv_a = a / "path_b2_H0.7_n8.csv"
    svg_a = a / "path_b2_H0.7_n8.svg"
    assert csv_a.exists() and svg_a.exists()
    first_csv, first_svg = csv_a.read_bytes(), svg_a.read_bytes()
    assert main(args + ["--outdir", str(a)]) == 0
    assert csv_a.read_bytes() == first_csv
    assert svg_a.read_bytes() == first_svg
    assert main(args + ["--outdir", str(b)]) == 0
    assert read_rows(csv_a) == read_rows(b / "path_b2_H0.7_n8.csv")
    meta = read_meta(csv_a)
    assert meta["seed"] == "3"
    assert meta["stride"] == "1"
    svg = svg_a.read_text()
    assert svg.startswith("<?xml")
    assert "<!--\ntool = cascadekit" in svg
    assert "<svg" in svg and "<polyline" in svg


def test_simulate_ramp_values(tmp_path):
    """H = 1 path CSV is the identity t -> t at full precision."""
    assert main(["simulate", "--H", "1.0", "--depths", "4",
                 "--outdir", str(tmp_path)]) == 0
    _, rows = read_rows(tmp_path / "path_b2_H1_n4.csv")
    for t_str, v_str in rows:
        assert math.isclose(float(v_str), float(t_str), abs_tol=1e-15)


def test_simulate_symmetric_normalized(tmp_path):
    assert main(["simulate", "--H", "sym", "--depths", "6", "--normalize",
                 "--outdir", str(tmp_path)]) == 0
    out = tmp_path / "path_b2_Hsym_n6_norm.csv"
    assert out.exists()
    _, rows = read_rows(out)
    vals = np.array([float(r[1]) for r in rows])
    assert np.all(np.isfinite(vals))
    assert len(vals) == 2**6 + 1


def test_simulate_rejects_unknown_format(tmp_path, capsys):
    code = main(["simulate", "--formats", "png", "--outdir", str(tmp_path)])
    assert code == 2
    assert "png" in capsys.readouterr().err


def test_config_file_defaults_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("H = 0.5\nn = 4\nq = 2\n")
    assert main(["moments", "--config", str(cfg),
                 "--outdir", str(tmp_path)]) == 0
    assert (tmp_path / "moment_table_b2_H0.5.csv").exists()
    # explicit flag beats the file value
    assert main(["moments", "--config", str(cfg), "--H", "0.7",
                 "--outdir", str(tmp_path)]) == 0
    meta = read_meta(tmp_path / H07_TABLE)
    assert meta["H"] == "0.7"
    assert meta["n"] == "4"


def test_config_file_unknown_key_warns(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\nn = 4\n")
    assert main(["moments", "--config", str(cfg),
                 "--outdir", str(tmp_path)]) == 0
    assert "bogus" in capsys.readouterr().err


def test_config_file_malformed(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this line has no equals sign\n")
    assert main(["moments", "--config", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_env_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("CASCADEKIT_OUTDIR", str(tmp_path))
    assert main(["moments", "--H", "0.5", "--n", "4", "--q", "2"]) == 0
    assert (tmp_path / "moment_table_b2_H0.5.csv").exists()


def test_clt_terminal_json(tmp_path):
    code = main(["clt", "--test", "terminal", "--H", "0.3",
                 "--n", "8,12,16", "--reps", "4000",
                 "--outdir", str(tmp_path)])
    assert code == 0
    payload = json.loads((tmp_path / "clt_terminal_b2_H0.3.json")
                         .read_text())
    assert payload["meta"]["tool"] == "cascadekit"
    assert payload["d_decreasing"] is True
    assert len(payload["reports"]) == 3
    final = payload["reports"][-1]
    assert final["passed"] is True
    assert final["statistics"]["ks_distance"] <= 0.05


def test_clt_regime_mismatch_diagnostics(tmp_path, capsys):
    """Exit 2 plus a message naming the violated restriction."""
    code = main(["clt", "--test", "terminal", "--H", "0.7",
                 "--outdir", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "H <= 1/2" in err
    assert "convergent regime" in err
    code = main(["clt", "--test", "residual", "--H", "0.5",
                 "--outdir", str(tmp_path)])
    assert code == 2
    assert "convergent" in capsys.readouterr().err


def test_fractal_cli_passes_and_fails_on_tolerance(tmp_path):
    args = ["fractal", "--n", "18", "--seed", "35",
            "--outdir", str(tmp_path)]
    assert main(args) == 0
    payload = json.loads((tmp_path / "fractal_b2_H0.7_n18.json")
                         .read_text())
    assert abs(payload["box_dimension"]["estimate"] - 1.3) <= 0.1
    assert abs(payload["increment_exponent"]["estimate"] - 0.7) <= 0.05
    assert (tmp_path / "fractal_b2_H0.7_n18.csv").exists()
    # an impossible tolerance turns the same data into exit 1
    assert main(args + ["--exp-tol", "0.001"]) == 1


def test_fractal_regime_mismatch(capsys):
    assert main(["fractal", "--H", "0.3", "--n", "12"]) == 2
    assert "convergent regime" in capsys.readouterr().err


def test_density_cli(tmp_path):
    code = main(["density", "--outdir", str(tmp_path)])
    assert code == 0
    den = tmp_path / "density_b2_H0.7.csv"
    cf = tmp_path / "charfn_b2_H0.7.csv"
    assert den.exists() and cf.exists()
    meta = read_meta(den)
    assert abs(float(meta["integral"]) - 1.0) <= 1e-6
    assert abs(float(meta["mean"]) - 1.0) <= 1e-4
    assert float(meta["ladder_depth"]) == 192
    header, rows = read_rows(cf)
    assert header == ["t", "re", "im"]
    # the grid is symmetric and phi(0) = 1
    mid = rows[len(rows) // 2]
    assert float(mid[0]) == 0.0
    assert float(mid[1]) == 1.0


def test_density_h1_rejected(capsys):
    assert main(["density", "--H", "1.0"]) == 2
    assert "constant 1" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["unknown-command"])
