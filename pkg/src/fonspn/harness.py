"""Monte Carlo system identification: trials, NMSD traces, steady-state averages, CSV."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .adaptive import AlgoConfig, adapt_bands
from .filterbank import FilterBank, decompose, design_bank, num_frames
from .signalgen import (
    STREAM_INPUT,
    STREAM_NOISE,
    AlphaStableParams,
    Ar1Params,
    GaussianParams,
    ParameterError,
    generate,
    substream,
)

DB_FLOOR = -320.0
CSV_COLUMNS = ("update_index", "nmsd_db_mean", "nmsd_db_p10", "nmsd_db_p90", "diverged_count")


def to_db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10.0 * np.log10(np.maximum(x, 10.0 ** (DB_FLOOR / 10.0)))
    out = np.where(np.isnan(x), np.nan, out)
    return float(out) if out.ndim == 0 else out


@dataclass
class ExperimentConfig:
    """One system-identification scenario.

    ``true_system`` fixes h0 explicitly; otherwise h0 has standard-normal
    taps drawn from ``system_seed`` (scaled to unit norm when ``unit_norm``).
    ``flip_at`` is a fullband sample index after which the system is -h0.
    """

    algo: AlgoConfig
    input_source: Ar1Params = Ar1Params(0.999, GaussianParams(1.0))
    noise_source: Ar1Params = Ar1Params(0.0, GaussianParams(0.001))
    bands: int = 4
    bank_length: int = 32
    trials: int = 50
    total_samples: int = 100_000
    flip_at: Optional[int] = None
    steady_window: int = 10_000
    master_seed: int = 0
    true_system: Optional[np.ndarray] = None
    system_seed: int = 1
    unit_norm: bool = False
    initial_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.total_samples < 1:
            raise ParameterError("total_samples must be >= 1")
        if self.flip_at is not None and not (0 <= self.flip_at < self.total_samples):
            raise ParameterError("flip_at must lie inside the run")
        if self.steady_window < 1:
            raise ParameterError("steady_window must be >= 1")
        if self.true_system is not None:
            self.true_system = np.asarray(self.true_system, dtype=float)
            if self.true_system.shape != (self.algo.taps,):
                raise ParameterError(f"true_system must have {self.algo.taps} taps")

    @property
    def taps(self) -> int:
        return self.algo.taps

    @property
    def num_updates(self) -> int:
        return num_frames(self.total_samples, self.bands)

    def system(self) -> np.ndarray:
        if self.true_system is not None:
            h = self.true_system.copy()
        else:
            h = np.random.default_rng(self.system_seed).standard_normal(self.taps)
        if self.unit_norm:
            h /= np.linalg.norm(h)
        return h

    def bank(self) -> FilterBank:
        return design_bank(self.bands, self.bank_length)

    def replace(self, **changes) -> "ExperimentConfig":
        algo_keys = {f.name for f in dataclasses.fields(AlgoConfig)}
        algo_changes = {k: changes.pop(k) for k in list(changes) if k in algo_keys}
        cfg = dataclasses.replace(self, **changes)
        if algo_changes:
            cfg = dataclasses.replace(cfg, algo=dataclasses.replace(cfg.algo, **algo_changes))
        return cfg

    def describe(self) -> dict:
        """Flat key/value echo of the configuration."""

        def source(prefix, s):
            d = s.driving
            out = {f"{prefix}.pole": s.pole}
            if isinstance(d, AlphaStableParams):
                out.update({f"{prefix}.kind": "sas", f"{prefix}.alpha": d.alpha, f"{prefix}.zeta": d.zeta})
            else:
                out.update({f"{prefix}.kind": "gaussian", f"{prefix}.variance": d.variance})
            return out

        a = self.algo
        info = {
            "algo.algorithm": a.algorithm.value,
            "algo.mu": a.mu,
            "algo.p": a.p,
            "algo.beta": a.beta,
            "algo.taps": a.taps,
            "algo.eps": a.eps,
            **source("input", self.input_source),
            **source("noise", self.noise_source),
            "bank.bands": self.bands,
            "bank.length": self.bank_length,
            "run.trials": self.trials,
            "run.total_samples": self.total_samples,
            "run.flip_at": self.flip_at,
            "run.steady_window": self.steady_window,
            "run.master_seed": self.master_seed,
            "system.seed": self.system_seed,
            "system.unit_norm": self.unit_norm,
        }
        return info


@dataclass
class NmsdTrace:
    """Linear NMSD after every update, one row per trial.

    Rows of diverged trials are NaN from the update after divergence on and
    are left out of every aggregate.
    """

    nmsd: np.ndarray = field(repr=False)
    diverged: np.ndarray
    h0_norm_sq: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.nmsd = np.atleast_2d(np.asarray(self.nmsd, dtype=float))
        self.diverged = np.atleast_1d(np.asarray(self.diverged, dtype=bool))
        if self.diverged.shape[0] != self.nmsd.shape[0]:
            raise ValueError("one divergence flag per trial is required")

    @classmethod
    def stack(cls, traces: Sequence["NmsdTrace"], label: str = "") -> "NmsdTrace":
        if not traces:
            return cls(np.empty((0, 0)), np.empty(0, dtype=bool), 1.0, label)
        return cls(
            np.vstack([t.nmsd for t in traces]),
            np.concatenate([t.diverged for t in traces]),
            traces[0].h0_norm_sq,
            label or traces[0].label,
        )

    @property
    def trials(self) -> int:
        return self.nmsd.shape[0]

    @property
    def length(self) -> int:
        return self.nmsd.shape[1]

    @property
    def diverged_trials(self) -> int:
        return int(self.diverged.sum())

    @property
    def all_diverged(self) -> bool:
        return self.trials > 0 and self.diverged_trials == self.trials

    @property
    def survivors(self) -> np.ndarray:
        return self.nmsd[~self.diverged]

    def mean(self) -> np.ndarray:
        """Trial-averaged linear NMSD (NaN everywhere when every trial diverged)."""
        rows = self.survivors
        if rows.shape[0] == 0:
            return np.full(self.length, np.nan)
        return rows.mean(axis=0)

    def mean_db(self) -> np.ndarray:
        return to_db(self.mean())

    def percentile_db(self, q: float) -> np.ndarray:
        rows = self.survivors
        if rows.shape[0] == 0:
            return np.full(self.length, np.nan)
        return np.percentile(to_db(rows), q, axis=0)

    def trial_db(self, i: int) -> np.ndarray:
        return to_db(self.nmsd[i])

    def final_db(self, last: int = 1000) -> float:
        """Mean NMSD over the last ``last`` updates, in dB."""
        return steady_state_msd_empirical(self, min(last, self.length)).db


class SteadyState(NamedTuple):
    linear: float
    db: float


def steady_state_msd_empirical(trace: NmsdTrace, window: int = 10_000, normalized: bool = True) -> SteadyState:
    """Mean of the last ``window`` trial-averaged linear (N)MSD values.

    With ``normalized=False`` the value is rescaled by ``||h0||^2`` to an
    absolute MSD.  Returns ``inf`` when every trial diverged.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if trace.length < window:
        raise ValueError(f"trace has {trace.length} updates, fewer than the window of {window}")
    if trace.all_diverged:
        return SteadyState(math.inf, math.inf)
    value = float(np.mean(trace.mean()[-window:]))
    if not normalized:
        value *= trace.h0_norm_sq
    return SteadyState(value, to_db(value))


def _signals(cfg: ExperimentConfig, trial_index: int, h0: np.ndarray):
    T = cfg.total_samples
    x = generate(cfg.input_source, T, substream(cfg.master_seed, trial_index, STREAM_INPUT))
    noise = generate(cfg.noise_source, T, substream(cfg.master_seed, trial_index, STREAM_NOISE))
    clean = lfilter(h0, [1.0], x)
    if cfg.flip_at is not None:
        clean[cfg.flip_at :] *= -1.0
    return x, clean + noise


def run_trial(
    cfg: ExperimentConfig, trial_index: int, bank: Optional[FilterBank] = None, backend: Optional[str] = None
) -> NmsdTrace:
    """One Monte Carlo trial with its own input and noise substreams."""
    bank = cfg.bank() if bank is None else bank
    h0 = cfg.system()
    x, d = _signals(cfg, trial_index, h0)
    nb = bank.num_bands
    sign = np.ones(cfg.num_updates)
    if cfg.flip_at is not None:
        sign[np.arange(cfg.num_updates) * nb >= cfg.flip_at] = -1.0
    res = adapt_bands(
        decompose(bank, x), decompose(bank, d)[:, ::nb], cfg.algo, h0, sign, cfg.initial_weights, backend
    )
    return NmsdTrace(res.nmsd[None, :], [res.diverged], float(h0 @ h0), cfg.algo.label())


def run_experiment(cfg: ExperimentConfig, workers: int = 1, backend: Optional[str] = None) -> NmsdTrace:
    """All trials of ``cfg``; the result does not depend on ``workers``."""
    bank = cfg.bank()

    def one(i):
        return run_trial(cfg, i, bank, backend)

    if workers > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, range(cfg.trials)))
    else:
        traces = [one(i) for i in range(cfg.trials)]
    return NmsdTrace.stack(traces, cfg.algo.label())


# ---------------------------------------------------------------------------
# sweeps


class SweepPoint(NamedTuple):
    mu: float
    steady: SteadyState
    diverged_trials: int
    trials: int

    @property
    def converged(self) -> bool:
        return self.diverged_trials == 0 and self.steady.db < -10.0

    @property
    def unstable(self) -> bool:
        return self.diverged_trials > 0 or not self.steady.db < 0.0


def sweep_mu(cfg: ExperimentConfig, mus: Iterable[float], workers: int = 1, backend=None) -> list:
    points = []
    for mu in mus:
        trace = run_experiment(cfg.replace(mu=float(mu)), workers, backend)
        ss = steady_state_msd_empirical(trace, min(cfg.steady_window, trace.length), normalized=False)
        points.append(SweepPoint(float(mu), ss, trace.diverged_trials, trace.trials))
    return points


def knee(points: Sequence[SweepPoint]) -> float:
    """Midpoint between the last stable and the first unstable step size (``inf`` if none is unstable)."""
    ordered = sorted(points, key=lambda pt: pt.mu)
    for prev, cur in zip([None] + ordered[:-1], ordered):
        if cur.unstable:
            return cur.mu if prev is None else 0.5 * (prev.mu + cur.mu)
    return math.inf


def parse_grid(text: str) -> np.ndarray:
    """``"a:b:step"`` (inclusive of b within rounding) or a comma-separated list."""
    if ":" in text:
        parts = [float(s) for s in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"grid must be 'start:stop:step', got {text!r}")
        a, b, step = parts
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return a + step * np.arange(n)
    return np.array([float(s) for s in text.split(",") if s.strip()])


# ---------------------------------------------------------------------------
# CSV


def _comment_rows(metadata: Optional[dict]):
    return [[f"# {k} = {v}"] for k, v in (metadata or {}).items()]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def export_csv(trace: Optional[NmsdTrace], path, metadata: Optional[dict] = None) -> None:
    """Write the aggregate of ``trace`` as CSV with ``metadata`` echoed in ``#`` rows."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerows(_comment_rows(metadata))
            w.writerow(CSV_COLUMNS)
            if trace is None or trace.trials == 0:
                return
            mean = trace.mean_db()
            p10 = trace.percentile_db(10)
            p90 = trace.percentile_db(90)
            for k in range(trace.length):
                w.writerow([k, _fmt(mean[k]), _fmt(p10[k]), _fmt(p90[k]), trace.diverged_trials])
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)}: {exc}") from exc


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence], metadata: Optional[dict] = None) -> None:
    """Generic table writer used by the bounds, sweep and steady-state commands."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerows(_comment_rows(metadata))
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)}: {exc}") from exc


def read_csv(path):
    """Parse a file written by :func:`export_csv` or :func:`write_rows`.

    Returns ``(metadata, header, columns)`` where ``columns`` maps each
    header name to a float array (a string array for text columns).
    """
    metadata, header, rows = {}, None, []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].startswith("#"):
                key, _, value = row[0][1:].partition("=")
                metadata[key.strip()] = value.strip()
            elif header is None:
                header = row
            else:
                rows.append(row)
    header = header or []
    columns = {name: _column([r[j] for r in rows]) for j, name in enumerate(header)}
    return metadata, header, columns


def _column(values):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        return np.array(values, dtype=str)
