"""NSAF, NSPN and fractional-order NSPN subband adaptive filters.

All three share the update

    h <- h + mu * sum_i g(e_i) * X_i^(beta-1) x_i / (||x_i||_p^p + eps)

with ``g(e) = sgn(e) |e|^(p - beta)`` and ``X_i = diag(|x_i|)``.  NSPN is the
``beta = 1`` case and NSAF the ``p = 2, beta = 1`` case; both baselines are
also coded directly (:func:`nspn_update`, :func:`nsaf_update`) so the
reductions can be checked against an independent path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .filterbank import FilterBank, SubbandFrame, decompose, pad_history
from .signalgen import ParameterError
from .theory import beta_range

DEFAULT_EPS = 1e-6
# NMSD above +100 dB counts as divergence
DIVERGENCE_LIMIT = 1e10


class Algorithm(str, enum.Enum):
    NSAF = "NSAF"
    NSPN = "NSPN"
    FONSPN = "FoNSPN"

    @classmethod
    def parse(cls, name) -> "Algorithm":
        if isinstance(name, cls):
            return name
        for member in cls:
            if member.value.lower() == str(name).lower():
                return member
        raise ParameterError(f"unknown algorithm {name!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm choice and parameters.

    ``strict`` enforces ``p >= beta`` for FoNSPN; switch it off to run the
    deliberately out-of-range orders used in robustness comparisons.  When
    ``guard_alpha`` is set, FoNSPN additionally requires ``beta`` to lie in
    ``beta_range(p, guard_alpha)``.
    """

    algorithm: Algorithm = Algorithm.FONSPN
    mu: float = 0.1
    p: float = 2.0
    beta: float = 1.0
    taps: int = 20
    eps: float = DEFAULT_EPS
    strict: bool = True
    guard_alpha: Optional[float] = None

    def __post_init__(self):
        algo = Algorithm.parse(self.algorithm)
        object.__setattr__(self, "algorithm", algo)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "beta", float(self.beta))
        if not self.mu > 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if int(self.taps) != self.taps or self.taps < 1:
            raise ParameterError(f"taps must be a positive integer, got {self.taps}")
        object.__setattr__(self, "taps", int(self.taps))
        if not self.eps >= 0:
            raise ParameterError(f"eps must be non-negative, got {self.eps}")
        if not self.p > 0:
            raise ParameterError(f"p must be positive, got {self.p}")
        if algo is Algorithm.NSAF and (self.p != 2.0 or self.beta != 1.0):
            raise ParameterError("NSAF fixes p=2 and beta=1")
        if algo is Algorithm.NSPN and self.beta != 1.0:
            raise ParameterError("NSPN fixes beta=1")
        if algo is Algorithm.FONSPN:
            if self.strict and self.p < self.beta:
                raise ParameterError(f"FoNSPN needs p >= beta (p={self.p}, beta={self.beta})")
            if self.guard_alpha is not None and self.beta not in beta_range(self.p, self.guard_alpha):
                raise ParameterError(
                    f"beta={self.beta} outside {beta_range(self.p, self.guard_alpha)} for alpha={self.guard_alpha}"
                )

    @property
    def gain_exponent(self) -> float:
        return self.p - self.beta

    def label(self) -> str:
        if self.algorithm is Algorithm.FONSPN:
            return f"FoNSPN(p={self.p:g}, beta={self.beta:g})"
        if self.algorithm is Algorithm.NSPN:
            return f"NSPN(p={self.p:g})"
        return "NSAF"


@dataclass
class FilterState:
    weights: np.ndarray
    update_count: int = 0
    diverged: bool = False

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if self.weights.ndim != 1:
            raise ValueError("weights must be a vector")

    @classmethod
    def zeros(cls, taps: int) -> "FilterState":
        return cls(np.zeros(taps))

    @property
    def taps(self) -> int:
        return self.weights.size


def _check_frame(state: FilterState, frame: SubbandFrame):
    if frame.taps != state.taps:
        raise ValueError(f"regressor length {frame.taps} != filter length {state.taps}")


def subband_errors(state: FilterState, frame: SubbandFrame) -> np.ndarray:
    _check_frame(state, frame)
    return frame.band_desired - frame.band_inputs @ state.weights


def gain(e, p: float, beta: float, strict: bool = True):
    """``sgn(e) |e|^(p - beta)`` with ``gain(0) = 0``."""
    if strict and p < beta:
        raise ParameterError(f"gain needs p >= beta (p={p}, beta={beta})")
    e = np.asarray(e, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(e == 0.0, 0.0, np.sign(e) * np.abs(e) ** (p - beta))
    return float(out) if out.ndim == 0 else out


def fractional_power_derivative(n: float, beta: float, x: float) -> float:
    """Order-``beta`` derivative of ``x**n``: ``Gamma(n+1) / Gamma(n+1-beta) * x**(n-beta)``."""
    if not n > 0:
        raise ParameterError(f"n must be positive, got {n}")
    # beta == n is kept: it gives the constant Gamma(n+1)
    if not beta <= n:
        raise ParameterError(f"beta must not exceed n, got beta={beta}, n={n}")
    if not x > 0:
        raise ParameterError(f"x must be positive, got {x}")
    return math.exp(gammaln(n + 1.0) - gammaln(n + 1.0 - beta)) * x ** (n - beta)


def _safe_div(num, den):
    # a zero denominator only occurs with an all-zero regressor, whose increment is zero
    return np.where(den == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))


def fonspn_direction(x, beta: float, eps: float = DEFAULT_EPS):
    """``X^(beta-1) x`` with every diagonal entry regularised to ``|x| + eps``."""
    x = np.asarray(x, dtype=float)
    if beta == 1.0:
        return x
    return (np.abs(x) + eps) ** (beta - 1.0) * x


def pnorm_p(x, p: float):
    """``||x||_p^p`` along the last axis."""
    return np.sum(np.abs(np.asarray(x, dtype=float)) ** p, axis=-1)


def fonspn_increment(state: FilterState, frame: SubbandFrame, cfg: AlgoConfig) -> np.ndarray:
    """Weight increment divided by ``mu`` for the general fractional-order rule."""
    e = subband_errors(state, frame)
    g = gain(e, cfg.p, cfg.beta, strict=cfg.strict)
    x = frame.band_inputs
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = _safe_div(g, pnorm_p(x, cfg.p) + cfg.eps)
        return (scale[:, None] * fonspn_direction(x, cfg.beta, cfg.eps)).sum(axis=0)


def _commit(state: FilterState, new_weights: np.ndarray) -> FilterState:
    state.update_count += 1
    if not np.all(np.isfinite(new_weights)):
        state.diverged = True
    state.weights = new_weights
    return state


def nsaf_update(state: FilterState, frame: SubbandFrame, mu: float, eps: float = DEFAULT_EPS) -> FilterState:
    """Baseline NSAF: ``h + mu sum_i x_i e_i / (||x_i||^2 + eps)``."""
    x = frame.band_inputs
    e = subband_errors(state, frame)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = _safe_div(e, np.sum(x * x, axis=1) + eps)
        return _commit(state, state.weights + mu * (scale[:, None] * x).sum(axis=0))


def nspn_update(state: FilterState, frame: SubbandFrame, mu: float, p: float, eps: float = DEFAULT_EPS) -> FilterState:
    """Baseline NSPN: ``h + mu sum_i x_i |e_i|^(p-1) sgn(e_i) / (||x_i||_p^p + eps)``."""
    x = frame.band_inputs
    e = subband_errors(state, frame)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = np.where(e == 0.0, 0.0, np.sign(e) * np.abs(e) ** (p - 1.0))
        scale = _safe_div(g, np.sum(np.abs(x) ** p, axis=1) + eps)
        return _commit(state, state.weights + mu * (scale[:, None] * x).sum(axis=0))


def update(state: FilterState, frame: SubbandFrame, cfg: AlgoConfig) -> FilterState:
    """Apply one subband update in place and return ``state``.

    A diverged state is left untouched.
    """
    _check_frame(state, frame)
    if state.diverged:
        return state
    if cfg.algorithm is Algorithm.NSAF:
        return nsaf_update(state, frame, cfg.mu, cfg.eps)
    if cfg.algorithm is Algorithm.NSPN:
        return nspn_update(state, frame, cfg.mu, cfg.p, cfg.eps)
    return _commit(state, state.weights + cfg.mu * fonspn_increment(state, frame, cfg))


# ---------------------------------------------------------------------------
# batch path


@dataclass
class AdaptResult:
    weights: np.ndarray
    nmsd: np.ndarray = field(repr=False)
    diverged_at: int = -1

    @property
    def diverged(self) -> bool:
        return self.diverged_at >= 0


def _elementwise(bands: np.ndarray, cfg: AlgoConfig):
    """Direction vectors and p-power magnitudes for every band sample."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if cfg.algorithm is Algorithm.NSAF:
            return bands, bands * bands
        mag = np.abs(bands) ** cfg.p
        if cfg.algorithm is Algorithm.NSPN:
            return bands, mag
        return fonspn_direction(bands, cfg.beta, cfg.eps), mag


def adapt_bands(
    bands: np.ndarray,
    desired: np.ndarray,
    cfg: AlgoConfig,
    h_true: np.ndarray,
    sign: Optional[np.ndarray] = None,
    initial=None,
    backend: Optional[str] = None,
) -> AdaptResult:
    """Run the filter over whole band signals and record NMSD after every update.

    ``bands`` holds the full-rate band inputs ``(N, T)`` and ``desired`` the
    decimated band desired signals ``(N, K)``.  ``sign[k]`` (default +1)
    multiplies ``h_true`` when measuring the deviation after update ``k``,
    which is how a system flip is tracked.  The run stops at the first
    non-finite weight or NMSD above :data:`DIVERGENCE_LIMIT`.
    """
    bands = np.ascontiguousarray(bands, dtype=float)
    desired = np.ascontiguousarray(desired, dtype=float)
    nb, n_frames = desired.shape
    if bands.shape[0] != nb:
        raise ValueError("bands and desired disagree on the number of bands")
    if bands.shape[1] < (n_frames - 1) * nb + 1:
        raise ValueError("band signals are too short for the requested frames")
    h_true = np.ascontiguousarray(h_true, dtype=float)
    if h_true.shape != (cfg.taps,):
        raise ValueError(f"true system must have {cfg.taps} taps")
    if not np.any(h_true):
        raise ValueError("true system must be non-zero for NMSD")
    sign = np.ones(n_frames) if sign is None else np.ascontiguousarray(sign, dtype=float)
    w = np.zeros(cfg.taps) if initial is None else np.array(initial, dtype=float)

    direction, mag = _elementwise(bands, cfg)
    up = pad_history(bands, cfg.taps)
    vp = pad_history(direction, cfg.taps)
    ap = pad_history(mag, cfg.taps)
    kernel = {"numba": _kernels.adapt_numba, "numpy": _kernels.adapt_numpy, None: _kernels.adapt}[backend]
    nmsd, diverged_at = kernel(
        up, vp, ap, desired, h_true, sign, w, cfg.mu, cfg.gain_exponent, cfg.eps, DIVERGENCE_LIMIT
    )
    return AdaptResult(w, nmsd, int(diverged_at))


def adapt_signal(bank: FilterBank, x, d, cfg: AlgoConfig, h_true, sign=None, initial=None, backend=None) -> AdaptResult:
    """Analyse fullband input ``x`` and desired ``d`` with ``bank`` and run :func:`adapt_bands`."""
    nb = bank.num_bands
    return adapt_bands(decompose(bank, x), decompose(bank, d)[:, ::nb], cfg, h_true, sign, initial, backend)
