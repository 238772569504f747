import math
import re

import numpy as np
import pytest

from predrobust.core import (
    InvalidConfig,
    KernelSpec,
    METHOD_OLS_T,
    METHOD_TAU_NONLINEAR,
    METHOD_TAU_ORACLE,
    METHOD_TAU_SIGMA_HAT,
    RegressionSample,
    Seed,
    VOL_TRUE,
    VolatilityPath,
)
from predrobust.dgp import ConstantVol, DiscreteDgpConfig
from predrobust.inference import tau_oracle
from predrobust.montecarlo import (
    CSV_HEADER,
    ExcessiveFailures,
    McConfig,
    TABULATION_BANDWIDTH,
    WORKERS_ENV,
    _cell_statistics,
    _failure_check,
    _normalize_methods,
    _resolve_workers,
    _tau_oracle_rows,
    _trailing_vol_sq,
    reproduce_table,
    run_power,
    run_size,
    write_power_svg,
)

UNIFORM = KernelSpec.uniform()
TAU_ONLY = _normalize_methods((METHOD_TAU_SIGMA_HAT,))


def _cnst(T, **kw):
    return DiscreteDgpConfig(T=T, vol_model=ConstantVol(), **kw)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_rejects_bad_inputs():
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), reps=99)
    with pytest.raises(InvalidConfig):
        McConfig(dgp="cnst")
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), methods=())
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), methods=("no_such_test",))
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), levels=(0.0,))
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), workers=0)


def test_nonlinear_method_defaults_to_sign_transform():
    cfg = McConfig(dgp=_cnst(60), methods=(METHOD_TAU_NONLINEAR,))
    name, gamma = cfg.methods[0]
    assert name == METHOD_TAU_NONLINEAR
    assert gamma is not None
    np.testing.assert_array_equal(
        gamma.apply(np.array([-1.0, 0.0, 2.0])), [-1.0, 1.0, 1.0]
    )
    with pytest.raises(InvalidConfig):
        McConfig(dgp=_cnst(60), methods=((METHOD_OLS_T, gamma),))


def test_worker_resolution_from_environment(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert _resolve_workers(None) == 1
    assert _resolve_workers(7) == 7
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert _resolve_workers(None) == 3
    assert _resolve_workers(2) == 2  # explicit request wins
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(InvalidConfig):
        _resolve_workers(None)
    monkeypatch.setenv(WORKERS_ENV, "-1")
    with pytest.raises(InvalidConfig):
        _resolve_workers(None)


def test_failure_check_threshold():
    stats = np.ones(1000)
    stats[:10] = np.nan
    good, n_failed = _failure_check(stats, 1000, "ctx")
    assert n_failed == 10 and good.size == 990
    stats[10] = np.inf
    with pytest.raises(ExcessiveFailures):
        _failure_check(stats, 1000, "ctx")


# ---------------------------------------------------------------------------
# trailing volatility window
# ---------------------------------------------------------------------------

def test_trailing_window_reproduces_constant_level():
    usq = np.full((3, 40), 2.25)
    sig2 = _trailing_vol_sq(usq, UNIFORM, 8.0)
    np.testing.assert_allclose(sig2, 2.25, rtol=1e-12)


def test_trailing_window_ignores_future_residuals():
    rng = np.random.default_rng(7)
    usq = rng.random((2, 40)) + 0.1
    base = _trailing_vol_sq(usq, UNIFORM, 8.0)
    bumped = usq.copy()
    bumped[:, 20:] += 5.0
    after = _trailing_vol_sq(bumped, UNIFORM, 8.0)
    np.testing.assert_array_equal(after[:, :20], base[:, :20])
    assert (after[:, 20:] != base[:, 20:]).any()


def test_trailing_window_flat_below_bandwidth():
    rng = np.random.default_rng(8)
    usq = rng.random((1, 40)) + 0.1
    sig2 = _trailing_vol_sq(usq, UNIFORM, 8.0)
    # indices 0..6 all reuse one startup value
    assert np.unique(sig2[0, :7]).size == 1


# ---------------------------------------------------------------------------
# replication streams
# ---------------------------------------------------------------------------

def test_statistics_extend_without_changing_prefix():
    cfg = _cnst(60)
    short = _cell_statistics(cfg, TAU_ONLY, 700, 9, 5, 1, UNIFORM, TABULATION_BANDWIDTH)
    long = _cell_statistics(cfg, TAU_ONLY, 1200, 9, 5, 1, UNIFORM, TABULATION_BANDWIDTH)
    np.testing.assert_array_equal(
        long[METHOD_TAU_SIGMA_HAT][:700], short[METHOD_TAU_SIGMA_HAT]
    )


def test_statistics_identical_across_worker_counts():
    cfg = _cnst(60)
    args = (cfg, TAU_ONLY, 1000, 4, 11, None, UNIFORM, TABULATION_BANDWIDTH)
    by_workers = {}
    for w in (1, 4, 16):
        got = _cell_statistics(*args[:5], w, *args[6:])
        by_workers[w] = got[METHOD_TAU_SIGMA_HAT]
    np.testing.assert_array_equal(by_workers[4], by_workers[1])
    np.testing.assert_array_equal(by_workers[16], by_workers[1])


def test_small_job_falls_back_to_single_chunk():
    cfg = _cnst(60)
    a = _cell_statistics(cfg, TAU_ONLY, 20, 4, 11, 16, UNIFORM, TABULATION_BANDWIDTH)
    b = _cell_statistics(cfg, TAU_ONLY, 20, 4, 11, 1, UNIFORM, TABULATION_BANDWIDTH)
    np.testing.assert_array_equal(a[METHOD_TAU_SIGMA_HAT], b[METHOD_TAU_SIGMA_HAT])


def test_engine_oracle_rows_match_single_sample_test():
    rng = np.random.default_rng(12)
    y = rng.standard_normal(30)
    x = rng.standard_normal(30)
    vol = 0.5 + rng.random(30)
    sample = RegressionSample(y=y, x_lag=x)
    single = tau_oracle(sample, VolatilityPath(values=vol, kind=VOL_TRUE))
    batch = _tau_oracle_rows(y[None, :], x[None, :], vol[None, :])
    assert batch[0] == single.statistic


# ---------------------------------------------------------------------------
# size experiments
# ---------------------------------------------------------------------------

def test_size_of_oracle_statistic_tracks_nominal_levels():
    cfg = McConfig(
        dgp=_cnst(60), reps=2000, methods=(METHOD_TAU_ORACLE,), master_seed=2
    )
    table = run_size(cfg)
    assert len(table.cells) == 3
    for cell in table.cells:
        assert cell.model == "cnst" and cell.method == METHOD_TAU_ORACLE
        assert cell.n_failed == 0 and cell.reps == 2000
        nominal = 100.0 * cell.level
        se = 100.0 * math.sqrt(cell.level * (1 - cell.level) / 2000)
        assert abs(cell.reject_pct - nominal) < 3.0 * se + 1e-9
        assert cell.mc_se == pytest.approx(
            100.0 * math.sqrt((cell.reject_pct / 100) * (1 - cell.reject_pct / 100) / 2000)
        )


def test_size_run_forces_null_slope():
    base = McConfig(dgp=_cnst(60), reps=200, master_seed=3)
    shifted = McConfig(dgp=_cnst(60, beta_bar=7.0), reps=200, master_seed=3)
    assert run_size(base) == run_size(shifted)


def test_size_run_is_reproducible():
    cfg = McConfig(dgp=_cnst(60), reps=200, master_seed=5)
    assert run_size(cfg) == run_size(cfg)


def test_least_squares_overrejects_under_endogeneity():
    cfg = McConfig(
        dgp=_cnst(240), reps=4000, methods=(METHOD_OLS_T,), levels=(0.05,)
    )
    cell = run_size(cfg).one(level=0.05)
    assert 40.0 < cell.reject_pct < 48.0


def test_size_table_lookup_helpers():
    cfg = McConfig(dgp=_cnst(60), reps=200, methods=(METHOD_TAU_ORACLE,))
    table = run_size(cfg)
    assert len(table.lookup(level=0.05)) == 1
    assert table.one(level=0.05).level == 0.05
    with pytest.raises(KeyError):
        table.one(model="cnst")  # three levels match


def test_size_table_csv_format(tmp_path):
    cfg = McConfig(dgp=_cnst(60), reps=200, methods=(METHOD_TAU_ORACLE,))
    path = tmp_path / "size.csv"
    run_size(cfg).to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 4
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[0] == "cnst" and fields[1] == METHOD_TAU_ORACLE
        assert re.fullmatch(r"\d+\.\d{4}", fields[5])
        assert re.fullmatch(r"\d+\.\d{4}", fields[6])


# ---------------------------------------------------------------------------
# power experiments
# ---------------------------------------------------------------------------

def test_power_grid_must_start_at_zero():
    cfg = McConfig(dgp=_cnst(60), reps=1000, levels=(0.05,))
    with pytest.raises(InvalidConfig):
        run_power(cfg, beta_grid=(5.0, 10.0))
    with pytest.raises(InvalidConfig):
        run_power(cfg, beta_grid=(0.0, -5.0))


def test_power_at_null_equals_nominal_level_exactly():
    cfg = McConfig(dgp=_cnst(60), reps=2000, levels=(0.05,), master_seed=6)
    curve = run_power(cfg, beta_grid=(0.0, 10.0))
    rates = curve.rates(METHOD_TAU_SIGMA_HAT)
    assert rates[0] == 5.0
    assert curve.level == 0.05
    cvs = {p.critical_value for p in curve.points}
    assert len(cvs) == 1  # one size-adjusted cutoff shared across the grid


def test_power_increases_in_signal_strength():
    cfg = McConfig(dgp=_cnst(240), reps=2000, levels=(0.05,), master_seed=7)
    curve = run_power(cfg, beta_grid=(0.0, 10.0, 20.0))
    rates = curve.rates(METHOD_TAU_SIGMA_HAT)
    assert all(b >= a - 1.0 for a, b in zip(rates, rates[1:]))
    assert rates[-1] > 80.0
    assert curve.methods() == [METHOD_TAU_SIGMA_HAT]


def test_power_curve_outputs(tmp_path):
    cfg = McConfig(dgp=_cnst(60), reps=1000, levels=(0.05,), master_seed=8)
    curve = run_power(cfg, beta_grid=(0.0, 20.0))
    csv_path = tmp_path / "power.csv"
    curve.to_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("model,method,kappa,T,level,beta_bar,reject_pct")
    assert len(lines) == 3
    svg_path = tmp_path / "power.svg"
    write_power_svg(curve, svg_path)
    assert "<svg" in svg_path.read_text()


# ---------------------------------------------------------------------------
# published-grid reproduction
# ---------------------------------------------------------------------------

def test_reproduce_validates_inputs():
    with pytest.raises(InvalidConfig):
        reproduce_table(3)
    with pytest.raises(InvalidConfig):
        reproduce_table(2, reps=99)


def test_reproduce_discrete_grid_subset():
    rep = reproduce_table(2, reps=100, models=("cnst",))
    assert rep.table_id == 2
    assert len(rep.size_table.cells) == 18  # 3 kappa x 3 T x 2 methods
    assert len(rep.deviations) == 18
    assert all(d.reference is not None for d in rep.deviations)
    assert all(d.delta == pytest.approx(d.ours - d.reference) for d in rep.deviations)
    assert math.isfinite(rep.max_abs_delta())
    md = rep.markdown()
    assert "## cnst" in md
    assert "BQ, RLRT" in md
    assert "| method | kappa |" in md and "T=600" in md


def test_reproduce_continuous_grid_subset():
    rep = reproduce_table("table1", reps=100, models=("rs",))
    assert rep.table_id == 1
    assert sorted({c.T for c in rep.size_table.cells}) == [60, 240, 600]
    assert "Cauchy-RT" in rep.markdown()


def test_reproduce_squared_diffusion_reuses_reference_row():
    rep = reproduce_table(1, reps=100, models=("gbm-alt",))
    assert {d.model for d in rep.deviations} == {"gbm-alt"}
    assert all(d.reference is not None for d in rep.deviations)
