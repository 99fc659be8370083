"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The Monte Carlo criteria use 50 trials.  A short summary of every verdict is
printed at the end of the pytest run.
"""

import math
import os
import warnings

import numpy as np
import pytest

from fonspn.adaptive import AlgoConfig, FilterState, gain, fractional_power_derivative, nsaf_update, nspn_update, update
from fonspn.filterbank import SubbandFrame, analyze, decimated, design_bank
from fonspn.harness import export_csv, knee, read_csv, run_experiment, steady_state_msd_empirical, sweep_mu, to_db
from fonspn.scenarios import cauchy_input, config_moments, gaussian_identification, impulsive_noise
from fonspn.signalgen import AlphaStableParams, sample_sas
from fonspn.theory import beta_range, steady_state_msd, step_size_bound

TRIALS = 50
WORKERS = os.cpu_count() or 1
# multiples of the step-size bound swept for the stability criterion
BOUND_GRID = (0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.05, 1.2, 1.35, 1.5, 1.65, 1.8)
FINAL_WINDOW = 1000

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def gaussian_setup():
    cfg = gaussian_identification(trials=TRIALS)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        moments = config_moments(cfg)
        bound = step_size_bound(moments, cfg.taps, 1.0)
    return cfg, moments, bound


def _window_db(trace, stop, width=FINAL_WINDOW):
    return float(to_db(np.mean(trace.mean()[stop - width : stop])))


# ---------------------------------------------------------------- 1


def test_c1_degeneration(verdict):
    rng = np.random.default_rng(2024)
    frames = [SubbandFrame(rng.standard_normal((4, 20)), rng.standard_normal(4), k) for k in range(100)]
    mismatches = []
    for p in (0.7, 1.0, 1.5, 2.0):
        a, b = FilterState.zeros(20), FilterState.zeros(20)
        cfg = AlgoConfig("FoNSPN", mu=0.05, p=p, beta=1.0, taps=20, strict=False)
        for f in frames:
            update(a, f, cfg)
            nspn_update(b, f, 0.05, p)
            if not np.array_equal(a.weights, b.weights):
                mismatches.append(f"NSPN p={p} frame {f.frame_index}")
                break
    a, b = FilterState.zeros(20), FilterState.zeros(20)
    cfg = AlgoConfig("FoNSPN", mu=0.4, p=2.0, beta=1.0, taps=20)
    for f in frames:
        update(a, f, cfg)
        nsaf_update(b, f, 0.4)
        if not np.array_equal(a.weights, b.weights):
            mismatches.append(f"NSAF frame {f.frame_index}")
            break
    verdict(1, "degeneration equivalence", not mismatches, "; ".join(mismatches) or "bit-identical over 100 frames")


# ---------------------------------------------------------------- 2


def test_c2_beta_interval(verdict):
    r = beta_range(0.7, 0.75)
    ok = r.lower == 0.325 and r.upper == 0.7 and 0.325 not in r and 0.7 in r
    verdict(2, "beta interval", ok, str(r))


# ---------------------------------------------------------------- 3


def test_c3_step_size_bound(verdict, gaussian_setup):
    cfg, _, bound = gaussian_setup
    points = sweep_mu(cfg, [f * bound for f in BOUND_GRID], WORKERS)
    bad = []
    for frac, pt in zip(BOUND_GRID, points):
        if frac <= 0.9 and not (pt.converged and math.isfinite(pt.steady.db)):
            bad.append(f"{frac}x did not converge ({pt.steady.db:.1f} dB, {pt.diverged_trials} diverged)")
        if frac >= 1.5 and not pt.unstable:
            bad.append(f"{frac}x stayed stable ({pt.steady.db:.1f} dB)")
    k = knee(points)
    ratio = k / bound
    if not (0.7 <= ratio <= 1.3):
        bad.append(f"knee {ratio:.3f}x bound")
    detail = f"bound={bound:.4f}, knee={ratio:.3f}x bound" + ("; " + "; ".join(bad) if bad else "")
    verdict(3, "step-size bound", not bad, detail)


# ---------------------------------------------------------------- 4


def test_c4_steady_state_model(verdict, gaussian_setup):
    cfg, moments, bound = gaussian_setup
    gaps = []
    for frac in (0.2, 0.4, 0.6):
        mu = frac * bound
        trace = run_experiment(cfg.replace(mu=mu), WORKERS)
        sim = steady_state_msd_empirical(trace, cfg.steady_window, normalized=False).db
        theory = to_db(steady_state_msd(moments, cfg.taps, mu, 1.0))
        gaps.append((frac, sim, theory))
    ok = all(abs(s - t) <= 2.0 for _, s, t in gaps)
    detail = ", ".join(f"{f}x: sim {s:.2f} dB vs model {t:.2f} dB" for f, s, t in gaps)
    verdict(4, "steady-state model", ok, detail)


# ---------------------------------------------------------------- 5


def test_c5_robustness_ordering(verdict):
    runs = {
        "FoNSPN b=0.65": impulsive_noise("FoNSPN", 0.65, trials=TRIALS),
        "FoNSPN b=0.1": impulsive_noise("FoNSPN", 0.1, trials=TRIALS),
        "FoNSPN b=1.5": impulsive_noise("FoNSPN", 1.5, trials=TRIALS),
        "NSPN": impulsive_noise("NSPN", 1.0, trials=TRIALS),
    }
    final = {}
    for name, cfg in runs.items():
        trace = run_experiment(cfg, WORKERS)
        final[name] = trace.final_db(FINAL_WINDOW) if not trace.all_diverged else math.inf
    best = final["FoNSPN b=0.65"]
    ok = all(final[n] - best >= 3.0 for n in final if n != "FoNSPN b=0.65")
    verdict(5, "robustness ordering", ok, ", ".join(f"{n}: {v:.2f} dB" for n, v in final.items()))


# ---------------------------------------------------------------- 6


def test_c6_cauchy_tracking(verdict):
    fo = cauchy_input("FoNSPN", 0.65, trials=TRIALS)
    ns = cauchy_input("NSPN", 1.0, trials=TRIALS)
    flip_frame = fo.flip_at // fo.bands
    t_fo = run_experiment(fo, WORKERS)
    t_ns = run_experiment(ns, WORKERS)
    pre = _window_db(t_fo, flip_frame)
    end = t_fo.final_db(FINAL_WINDOW)
    end_ns = t_ns.final_db(FINAL_WINDOW)
    ok = end < -10.0 and end <= pre + 3.0 and end_ns - end >= 5.0
    detail = f"FoNSPN pre-flip {pre:.2f} dB, final {end:.2f} dB; NSPN final {end_ns:.2f} dB"
    verdict(6, "Cauchy input and tracking", ok, detail)


# ---------------------------------------------------------------- 7


def test_c7_noise_generator(verdict):
    zeta = 1 / 60
    worst = 0.0
    for alpha in (0.75, 1.0, 1.5, 2.0):
        x = sample_sas(AlphaStableParams(alpha, zeta), 1_000_000, 7)
        for t in (0.5, 1.0, 2.0, 4.0):
            worst = max(worst, abs(np.mean(np.cos(t * x)) - math.exp(-zeta * t**alpha)))
    var = np.var(sample_sas(AlphaStableParams(2.0, zeta), 1_000_000, 8))
    rel = abs(var / (2 * zeta) - 1)
    verdict(7, "noise generator", worst <= 0.01 and rel <= 0.03, f"max ECF error {worst:.4f}, variance error {rel:.2%}")


# ---------------------------------------------------------------- 8


def test_c8_filter_bank(verdict):
    bank = design_bank(4, 32)
    omega, power = bank.power_sum()
    mid = np.interp(np.pi / 8, omega, power)
    ripple = float(np.max(np.abs(power / mid - 1)))

    x = np.random.default_rng(1).standard_normal(400)
    orig = list(analyze(bank, x, 20))
    shifted = list(analyze(bank, np.concatenate([np.zeros(4), x]), 20))[1:]
    shift_err = max(np.max(np.abs(a.band_inputs - b.band_inputs)) for a, b in zip(orig, shifted))

    var = 0.001
    noise = math.sqrt(var) * np.random.default_rng(2).standard_normal(1_000_000)
    sub = decimated(bank, noise)[:, 10:].var(axis=1)
    a3 = float(np.max(np.abs(sub / (var * bank.band_energy()) - 1)))
    ok = ripple <= 0.05 and shift_err <= 1e-12 and a3 <= 0.05
    verdict(8, "filter bank", ok, f"ripple {ripple:.4f}, shift error {shift_err:.1e}, subband variance error {a3:.2%}")


# ---------------------------------------------------------------- 9


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_c9_property_suite(verdict, tmp_path):
    fails = []
    if gain(0.0, 0.7, 0.65) != 0.0 or gain(-3.0, 2.0, 1.0) != -3.0:
        fails.append("gain trivial")
    if _rel(gain(-2.0, 0.7, 0.65), -(2.0**0.05)) > 1e-12:
        fails.append("gain -2^0.05")

    s = update(FilterState.zeros(2), SubbandFrame([[1.0, -2.0]], [1.0]),
               AlgoConfig("FoNSPN", mu=0.5, p=2.0, beta=1.0, taps=2, eps=0.0))
    if max(_rel(a, b) for a, b in zip(s.weights, (0.1, -0.2))) > 1e-12:
        fails.append("update p=2")
    s = update(FilterState.zeros(2), SubbandFrame([[1.0, -2.0]], [1.0]),
               AlgoConfig("FoNSPN", mu=0.3, p=1.0, beta=0.5, taps=2, eps=0.0))
    if max(_rel(a, b) for a, b in zip(s.weights, (0.1, -0.1 * math.sqrt(2)))) > 1e-12:
        fails.append("update p=1 beta=0.5")

    for args, want in (((2.0, 1.0, 3.0), 6.0), ((1.0, 0.5, 1.0), 2 / math.sqrt(math.pi)), ((1.0, 1.0, 5.0), 1.0)):
        if _rel(fractional_power_derivative(*args), want) > 1e-12:
            fails.append(f"fractional derivative {args}")

    cfg = impulsive_noise(trials=2, total_samples=4000)
    a, b = run_experiment(cfg), run_experiment(cfg)
    if not np.array_equal(a.nmsd, b.nmsd):
        fails.append("determinism")

    path = tmp_path / "trace.csv"
    export_csv(a, path, cfg.describe())
    meta, _, cols = read_csv(path)
    if not np.array_equal(cols["nmsd_db_mean"], a.mean_db()) or meta["algo.algorithm"] != "FoNSPN":
        fails.append("CSV round trip")
    verdict(9, "property suite", not fails, ", ".join(fails) or "all exact or within 1e-12")
