import math

import numpy as np
import pytest

from fonspn.adaptive import AlgoConfig
from fonspn.harness import (
    CSV_COLUMNS,
    DB_FLOOR,
    ExperimentConfig,
    NmsdTrace,
    SweepPoint,
    SteadyState,
    export_csv,
    knee,
    parse_grid,
    read_csv,
    run_experiment,
    run_trial,
    steady_state_msd_empirical,
    to_db,
    write_rows,
)
from fonspn.scenarios import cauchy_input, gaussian_identification, impulsive_noise
from fonspn.signalgen import Ar1Params, GaussianParams, ParameterError

QUIET = Ar1Params(0.0, GaussianParams(0.0))
# frozen after the first run: 5 trials, 1e5 samples, last 1e4 updates
GOLDEN_NSAF_DB = -37.99926256776462


def small(**kw):
    base = dict(algo=AlgoConfig("NSAF", mu=0.3, taps=8), trials=3, total_samples=2000, steady_window=100,
                unit_norm=True, input_source=Ar1Params(0.9, GaussianParams(1.0)))
    base.update(kw)
    return ExperimentConfig(**base)


def test_to_db_floor():
    assert to_db(0.0) == DB_FLOOR
    assert to_db(1.0) == 0.0
    assert to_db(1e-3) == pytest.approx(-30.0)
    assert math.isnan(to_db(float("nan")))


def test_perfect_start_reports_floor():
    cfg = small(noise_source=QUIET)
    cfg.initial_weights = cfg.system()
    trace = run_experiment(cfg)
    db = trace.mean_db()
    assert db[0] == DB_FLOOR
    assert np.all(np.isfinite(db)) and db.max() < -250


def test_zero_start_is_zero_db_before_learning():
    cfg = small(algo=AlgoConfig("NSAF", mu=1e-12, taps=8))
    assert cfg.system() @ cfg.system() == pytest.approx(1.0)
    assert run_trial(cfg, 0).trial_db(0)[0] == pytest.approx(0.0, abs=1e-6)


def test_flip_jump_is_six_db():
    # weights held at h0 by a negligible step size; the flipped target is -h0, so ||-h0 - h0||^2 = 4
    cfg = small(noise_source=QUIET, flip_at=1000, algo=AlgoConfig("NSAF", mu=1e-12, taps=8))
    cfg.initial_weights = cfg.system()
    db = run_trial(cfg, 0).trial_db(0)
    assert db[249] < -200
    assert db[250] == pytest.approx(10 * math.log10(4), abs=1e-6)


def test_single_trial_aggregate_equals_trace():
    cfg = small(trials=1)
    agg = run_experiment(cfg)
    one = run_trial(cfg, 0)
    np.testing.assert_array_equal(agg.mean(), one.nmsd[0])


def test_determinism_and_worker_invariance():
    cfg = small(trials=4)
    a = run_experiment(cfg)
    b = run_experiment(cfg, workers=3)
    np.testing.assert_array_equal(a.nmsd, b.nmsd)
    c = run_experiment(cfg.replace(master_seed=1))
    assert not np.array_equal(a.nmsd, c.nmsd)


def test_trials_use_distinct_substreams():
    trace = run_experiment(small(trials=2))
    assert not np.array_equal(trace.nmsd[0], trace.nmsd[1])


def test_all_diverged_is_reported():
    trace = run_experiment(small(algo=AlgoConfig("NSAF", mu=8.0, taps=8)))
    assert trace.all_diverged and trace.diverged_trials == 3
    assert np.all(np.isnan(trace.mean()))
    assert steady_state_msd_empirical(trace, 100).db == math.inf


def test_partial_divergence_excluded_from_mean():
    rows = np.array([[1.0, 0.1, 0.01], [1.0, 1e12, np.nan]])
    trace = NmsdTrace(rows, [False, True])
    np.testing.assert_array_equal(trace.mean(), [1.0, 0.1, 0.01])
    assert trace.diverged_trials == 1 and not trace.all_diverged


def test_steady_state_examples():
    flat = NmsdTrace(np.full((2, 500), 1e-3), [False, False])
    assert steady_state_msd_empirical(flat, 100).db == pytest.approx(-30.0, abs=1e-12)
    ramp = NmsdTrace(np.arange(1.0, 11.0)[None, :], [False])
    assert steady_state_msd_empirical(ramp, 10).linear == pytest.approx(5.5)
    assert steady_state_msd_empirical(ramp, 2).linear == pytest.approx(9.5)
    scaled = NmsdTrace(np.full((1, 10), 0.5), [False], h0_norm_sq=4.0)
    assert steady_state_msd_empirical(scaled, 5, normalized=False).linear == pytest.approx(2.0)


def test_steady_state_short_trace():
    with pytest.raises(ValueError):
        steady_state_msd_empirical(NmsdTrace(np.ones((1, 10)), [False]), 11)


def test_golden_nsaf_curve():
    trace = run_experiment(gaussian_identification(mu=0.1, trials=5, total_samples=100_000))
    db = trace.mean_db()
    assert db[-1] < -25.0
    # trending down: each decade of updates ends lower than it started
    assert db[100] < db[0] and db[1000] < db[100] and db[10_000] < db[1000]
    assert steady_state_msd_empirical(trace, 10_000).db == pytest.approx(GOLDEN_NSAF_DB, abs=1e-6)


def test_config_validation():
    with pytest.raises(ParameterError):
        small(trials=0)
    with pytest.raises(ParameterError):
        small(flip_at=5000)
    with pytest.raises(ParameterError):
        small(true_system=np.ones(3))


def test_replace_routes_algo_fields():
    cfg = small().replace(mu=0.05, trials=7)
    assert cfg.algo.mu == 0.05 and cfg.trials == 7
    assert cfg.describe()["algo.mu"] == 0.05


def test_scenario_presets():
    assert impulsive_noise("NSPN", 1.0).algo.label() == "NSPN(p=0.7)"
    c = cauchy_input(total_samples=1000)
    assert c.flip_at == 500 and c.input_source.heavy_tailed
    g = gaussian_identification()
    assert g.unit_norm and g.algo.p == 2.0


# ---------------------------------------------------------------- sweeps


def _pt(mu, db, div=0):
    return SweepPoint(mu, SteadyState(10 ** (db / 10), db), div, 5)


def test_knee_and_flags():
    pts = [_pt(0.5, -30), _pt(1.0, -20), _pt(1.5, 5), _pt(2.0, 0, div=5)]
    assert pts[0].converged and not pts[0].unstable
    assert pts[2].unstable and pts[3].unstable
    assert knee(pts) == 1.25
    assert knee(pts[:2]) == math.inf


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0.1:0.5:0.1"), [0.1, 0.2, 0.3, 0.4, 0.5])
    np.testing.assert_allclose(parse_grid("0.2, 0.4,0.6"), [0.2, 0.4, 0.6])
    with pytest.raises(ValueError):
        parse_grid("1:0:0.1")


# ---------------------------------------------------------------- CSV


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    export_csv(None, path, {"note": "nothing"})
    meta, header, cols = read_csv(path)
    assert meta == {"note": "nothing"}
    assert tuple(header) == CSV_COLUMNS
    assert all(v.size == 0 for v in cols.values())
    export_csv(NmsdTrace.stack([]), tmp_path / "e2.csv")
    assert (tmp_path / "e2.csv").read_text().strip() == ",".join(CSV_COLUMNS)


def test_csv_round_trip(tmp_path):
    cfg = small()
    trace = run_experiment(cfg)
    path = tmp_path / "run.csv"
    export_csv(trace, path, cfg.describe())
    meta, header, cols = read_csv(path)
    assert meta["algo.algorithm"] == "NSAF" and meta["run.trials"] == "3"
    np.testing.assert_array_equal(cols["update_index"], np.arange(trace.length))
    np.testing.assert_array_equal(cols["nmsd_db_mean"], trace.mean_db())
    np.testing.assert_array_equal(cols["nmsd_db_p90"], trace.percentile_db(90))


def _data_rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_csv_byte_identical_reruns(tmp_path):
    cfg = small()
    export_csv(run_experiment(cfg), tmp_path / "a.csv", cfg.describe())
    export_csv(run_experiment(cfg, workers=2), tmp_path / "b.csv", cfg.describe())
    assert _data_rows(tmp_path / "a.csv") == _data_rows(tmp_path / "b.csv")


def test_write_rows_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_rows(path, ("mu", "db"), [(0.1, -30.25), (0.2, 1 / 3)], {"k": 1})
    meta, header, cols = read_csv(path)
    assert header == ["mu", "db"] and meta == {"k": "1"}
    assert cols["db"][1] == 1 / 3


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        export_csv(None, tmp_path / "missing" / "x.csv")
