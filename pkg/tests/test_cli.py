import re
import shutil
import subprocess

import pytest

from predrobust.cli import (
    EXIT_ERROR,
    EXIT_GATE,
    EXIT_OK,
    EXIT_USAGE,
    _demean_predictor,
    main,
)
from predrobust.core import Seed
from predrobust.dgp import ConstantVol, DiscreteDgpConfig, simulate_discrete
from predrobust.inference import tau_sigma_hat
from predrobust.montecarlo import CSV_HEADER


def _simulate_csv(tmp_path, name="data.csv", seed=7, T=600, extra=()):
    path = tmp_path / name
    rc = main(
        ["simulate", "--model", "cnst", "--T", str(T), "--seed", str(seed),
         "--out", str(path), *extra]
    )
    assert rc == EXIT_OK
    return path


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def test_console_script_help():
    exe = shutil.which("predrobust")
    assert exe, "console script should be installed"
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("test", "simulate", "reproduce"):
        assert sub in proc.stdout


def test_missing_positional_exits_64():
    with pytest.raises(SystemExit) as exc:
        main(["test"])
    assert exc.value.code == EXIT_USAGE


def test_unknown_kernel_exits_64(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["test", "x.csv", "--kernel", "gaussian"])
    assert exc.value.code == EXIT_USAGE


# ---------------------------------------------------------------------------
# test subcommand
# ---------------------------------------------------------------------------

def test_rejects_three_row_file(tmp_path, capsys):
    path = tmp_path / "tiny.csv"
    path.write_text("y,x\n0.1,0.2\n0.3,0.4\n0.5,0.6\n")
    assert main(["test", str(path)]) == EXIT_ERROR
    assert "predrobust: error" in capsys.readouterr().err


def test_rejects_missing_columns(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    assert main(["test", str(path)]) == EXIT_ERROR
    assert "header must include" in capsys.readouterr().err


def test_reports_non_numeric_cell_with_line(tmp_path, capsys):
    path = tmp_path / "nonnum.csv"
    path.write_text("y,x\n1.0,2.0\n1.0,oops\n")
    assert main(["test", str(path)]) == EXIT_ERROR
    assert ":3:" in capsys.readouterr().err


def test_reports_missing_file(capsys):
    assert main(["test", "/nonexistent/data.csv"]) == EXIT_ERROR
    assert "not found" in capsys.readouterr().err


def test_bandwidth_rate_flag_reported(tmp_path, capsys):
    path = _simulate_csv(tmp_path)
    capsys.readouterr()
    rc = main(
        ["test", str(path), "--demean", "none",
         "--bandwidth-rate", "1", "0.333"]
    )
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert f"h={600.0 ** -0.333:.4f}" in out  # about 0.119
    assert "tau_sigma_hat: stat=" in out
    assert "config [test]:" in out


def test_levels_flag_controls_decisions(tmp_path, capsys):
    path = _simulate_csv(tmp_path)
    capsys.readouterr()
    assert main(["test", str(path), "--levels", "0.05"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "reject@0.05=" in out and "reject@0.01=" not in out


def test_gate_exit_matches_primary_decision(tmp_path, capsys):
    path = _simulate_csv(tmp_path)
    capsys.readouterr()
    rc = main(["test", str(path), "--gate"])
    out = capsys.readouterr().out
    if "reject@0.01=yes" in out:
        assert rc == EXIT_GATE and "gate: rejected" in out
    else:
        assert rc == EXIT_OK and "gate: not rejected" in out


def test_gate_trips_on_strong_signal(tmp_path, capsys):
    path = _simulate_csv(tmp_path, seed=1, extra=("--beta-bar", "20"))
    capsys.readouterr()
    rc = main(["test", str(path), "--gate"])
    assert rc == EXIT_GATE
    assert "gate: rejected" in capsys.readouterr().out


def test_diagnostics_path(tmp_path, capsys):
    data = _simulate_csv(tmp_path, T=80)
    diag = tmp_path / "vol.csv"
    assert main(["test", str(data), "--diagnostics", str(diag)]) == EXIT_OK
    lines = diag.read_text().strip().splitlines()
    assert lines[0] == "t,r,sigma_hat"
    assert len(lines) == 80  # header + 79 usable pairs after demeaning
    t, r, sig = lines[1].split(",")
    assert t == "1" and float(r) == 0.0 and float(sig) > 0.0
    capsys.readouterr()
    assert main(
        ["test", str(data), "--methods", "ols_t", "--diagnostics", str(diag)]
    ) == EXIT_USAGE


def test_oracle_method_needs_volatility_column(tmp_path, capsys):
    data = _simulate_csv(tmp_path, T=80)
    assert main(
        ["test", str(data), "--methods", "tau_oracle", "tau_sigma_hat"]
    ) == EXIT_OK
    assert "tau_oracle: stat=" in capsys.readouterr().out
    bare = tmp_path / "bare.csv"
    bare.write_text(
        "y,x\n" + "\n".join(f"{i * 0.1},{i * 0.2}" for i in range(30)) + "\n"
    )
    assert main(["test", str(bare), "--methods", "tau_oracle"]) == EXIT_USAGE


def test_toml_config_and_flag_precedence(tmp_path, capsys):
    data = _simulate_csv(tmp_path, T=60)
    cfg = tmp_path / "run.toml"
    cfg.write_text('[test]\nkernel = "quartic"\nlevels = [0.05]\n')
    capsys.readouterr()
    assert main(["test", str(data), "--config", str(cfg)]) == EXIT_OK
    assert "kernel=quartic" in capsys.readouterr().out
    assert main(
        ["test", str(data), "--config", str(cfg), "--kernel", "epanechnikov"]
    ) == EXIT_OK
    assert "kernel=epanechnikov" in capsys.readouterr().out


def test_toml_unknown_key_and_missing_file(tmp_path, capsys):
    data = _simulate_csv(tmp_path, T=60)
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[test]\nkernell = "quartic"\n')
    assert main(["test", str(data), "--config", str(cfg)]) == EXIT_USAGE
    assert main(["test", str(data), "--config", str(tmp_path / "no.toml")]) == EXIT_ERROR


# ---------------------------------------------------------------------------
# simulate subcommand
# ---------------------------------------------------------------------------

def test_simulate_is_deterministic_per_seed(tmp_path):
    a = _simulate_csv(tmp_path, "a.csv", seed=11, T=60)
    b = _simulate_csv(tmp_path, "b.csv", seed=11, T=60)
    c = _simulate_csv(tmp_path, "c.csv", seed=12, T=60)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_simulate_break_prints_variance_ratio(tmp_path, capsys):
    out = tmp_path / "sb.csv"
    rc = main(
        ["simulate", "--model", "sb", "--sigma0", "1", "--sigma1", "4",
         "--T", "500", "--seed", "2", "--out", str(out)]
    )
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "variance ratio after/before break" in text
    assert "expect about 16" in text


def test_simulate_usage_errors(tmp_path):
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "--model", "cnst", "--T", "60"]) == EXIT_USAGE
    assert main(
        ["simulate", "--model", "garch", "--T", "60", "--out", out]
    ) == EXIT_USAGE
    assert main(["simulate", "--model", "gbm", "--out", out]) == EXIT_USAGE


def test_simulate_without_seed_reports_choice(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = main(["simulate", "--model", "cnst", "--T", "60", "--out", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "chosen randomly" in text
    assert re.search(r"seed: \d+", text)


def test_simulate_continuous_row_count(tmp_path, capsys):
    out = tmp_path / "rs.csv"
    rc = main(
        ["simulate", "--model", "rs", "--years", "5", "--seed", "4",
         "--out", str(out)]
    )
    assert rc == EXIT_OK
    assert "wrote 61 rows" in capsys.readouterr().out
    assert len(out.read_text().strip().splitlines()) == 62


# ---------------------------------------------------------------------------
# reproduce subcommand
# ---------------------------------------------------------------------------

def test_reproduce_usage_errors(tmp_path):
    assert main(["reproduce", "--table", "2", "--reps", "0"]) == EXIT_USAGE
    assert main(["reproduce", "--reps", "500"]) == EXIT_USAGE
    assert main(
        ["reproduce", "--table", "2", "--power", "cnst", "0", "60"]
    ) == EXIT_USAGE
    assert main(["reproduce", "--power", "cnst", "0"]) == EXIT_USAGE
    assert main(["reproduce", "--power", "--kappa", "0"]) == EXIT_USAGE


def test_reproduce_table_subset(tmp_path, capsys):
    report = tmp_path / "report.md"
    table = tmp_path / "table.csv"
    rc = main(
        ["reproduce", "--table", "2", "--reps", "100", "--seed", "1",
         "--models", "cnst", "--report", str(report), "--out", str(table)]
    )
    assert rc == EXIT_OK
    md = report.read_text()
    assert "## cnst" in md and "delta" in md and "se" in md
    lines = table.read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 19  # 9 cells x 2 methods


def test_power_forms_are_equivalent(tmp_path, capsys):
    inline = tmp_path / "inline.csv"
    spelled = tmp_path / "spelled.csv"
    rc1 = main(
        ["reproduce", "--power", "cnst", "0", "60", "--reps", "1000",
         "--seed", "3", "--out", str(inline)]
    )
    rc2 = main(
        ["reproduce", "--power", "--model", "cnst", "--kappa", "0",
         "--T", "60", "--reps", "1000", "--seed", "3", "--out", str(spelled)]
    )
    assert rc1 == rc2 == EXIT_OK
    assert inline.read_bytes() == spelled.read_bytes()
    lines = inline.read_text().strip().splitlines()
    assert len(lines) == 23  # 11 grid points x 2 methods
    null_row = next(
        l for l in lines if l.startswith("cnst,tau_sigma_hat,0,60,0.05,0,")
    )
    assert null_row.split(",")[6] == "5.0000"  # adjusted size is nominal
    out = capsys.readouterr().out
    assert "beta_bar=  0.0  reject=  5.00%" in out


def test_power_rejects_unalignable_horizon():
    assert main(
        ["reproduce", "--power", "rs", "0", "100", "--reps", "1000"]
    ) == EXIT_USAGE


# ---------------------------------------------------------------------------
# null calibration of the full pipeline
# ---------------------------------------------------------------------------

def test_null_p_values_rarely_extreme(tmp_path, capsys):
    """Under the null, the pipeline's p-value should clear 0.001 for at
    least 999 of the first 1000 simulation seeds, and the CLI must agree
    with the library path bit-for-bit."""
    config = DiscreteDgpConfig(T=600, vol_model=ConstantVol())
    clear = 0
    recorded = {}
    for seed in range(1000):
        ds = simulate_discrete(config, Seed(seed))
        sample = _demean_predictor(ds.sample)
        outcome = tau_sigma_hat(sample)
        if outcome.p_value > 0.001:
            clear += 1
        if seed in (7, 107):
            recorded[seed] = outcome
    assert clear >= 999

    for seed, outcome in recorded.items():
        path = _simulate_csv(tmp_path, f"null{seed}.csv", seed=seed)
        capsys.readouterr()
        assert main(["test", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        m = re.search(r"tau_sigma_hat: stat=([+\-\d.]+) p=([\d.]+)", out)
        assert m is not None
        assert m.group(1) == f"{outcome.statistic:+.6f}"
        assert m.group(2) == f"{outcome.p_value:.6f}"
