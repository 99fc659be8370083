"""Closed-form predictions: admissible fractional order, step-size bound, steady-state MSD.

The expectations in the step-size bound and the steady-state model are
replaced by ensemble averages collected with :func:`estimate_moments`.
Both formulas are derived for ``p - beta = 1``; other settings are accepted
but raise a :class:`ModelValidityWarning`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .filterbank import BandFilter, FilterBank
from .signalgen import Ar1Params, ParameterError, SeedLike, sample_white

DEFAULT_MOMENT_FRAMES = 50_000


class ModelValidityWarning(UserWarning):
    """The closed-form model is used outside the ``p - beta = 1`` setting it was derived for."""


class HeavyTailWarning(UserWarning):
    """A moment that is infinite in theory was replaced by its (finite) sample value."""


class EstimationError(ValueError):
    pass


class InstabilityError(ArithmeticError):
    """The step size lies outside the region where the steady-state model is valid."""


@dataclass(frozen=True)
class Interval:
    """Half-open interval ``(lower, upper]``."""

    lower: float
    upper: float

    def __contains__(self, value) -> bool:
        return self.lower < value <= self.upper

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __str__(self):
        return f"({self.lower:g}, {self.upper:g}]"


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def beta_range(p: float, alpha: float) -> Interval:
    """Fractional orders that keep ``E|e|^(2(p - beta))`` finite: ``(p - alpha/2, p]``.

    The arithmetic is done on the decimal representations of the inputs so
    that e.g. ``beta_range(0.7, 0.75)`` is exactly ``(0.325, 0.7]``.
    """
    if not (0.0 < alpha <= 2.0):
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")
    if not (0.0 <= p <= alpha):
        raise ParameterError(f"need 0 <= p <= alpha, got p={p}, alpha={alpha}")
    return Interval(float(_dec(p) - _dec(alpha) / 2), float(p))


@dataclass
class SubbandMoments:
    """Per-band ensemble averages (arrays of length N).

    ``m_beta_plus_1 = E|x|^(beta+1)``, ``m_2beta = E|x|^(2 beta)``,
    ``m_pnorm = E||x||_p^p``, ``m_pnorm_sq = E||x||_p^(2p)``, and the band
    input and noise variances.
    """

    m_beta_plus_1: np.ndarray
    m_2beta: np.ndarray
    m_pnorm: np.ndarray
    m_pnorm_sq: np.ndarray
    var_x: np.ndarray
    var_n: np.ndarray
    p: Optional[float] = None
    beta: Optional[float] = None
    taps: Optional[int] = None
    frames: int = 0
    heavy_tail: bool = False

    def __post_init__(self):
        names = ("m_beta_plus_1", "m_2beta", "m_pnorm", "m_pnorm_sq", "var_x", "var_n")
        arrays = [np.atleast_1d(np.asarray(getattr(self, n), dtype=float)) for n in names]
        if len({a.shape for a in arrays}) != 1:
            raise ValueError("all moment arrays must have one entry per band")
        for n, a in zip(names, arrays):
            if np.any(a < 0):
                raise ValueError(f"{n} must be non-negative")
            setattr(self, n, a)

    @property
    def num_bands(self) -> int:
        return self.var_x.size

    def scaled_noise(self, factor: float) -> "SubbandMoments":
        """Copy with every band noise variance multiplied by ``factor``."""
        out = SubbandMoments(**{**self.__dict__, "var_n": self.var_n * factor})
        return out


def _check_model(moments: SubbandMoments, beta: float):
    if moments.beta is not None and not math.isclose(moments.beta, beta, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"moments were estimated at beta={moments.beta}, not {beta}")
    if moments.p is not None and abs(moments.p - beta - 1.0) > 1e-9:
        warnings.warn(
            f"model derived for p - beta = 1, used with p={moments.p}, beta={beta}",
            ModelValidityWarning,
            stacklevel=3,
        )


def step_size_bound(
    moments: SubbandMoments, taps: int, beta: float, h0_norm_sq: Optional[float] = None
) -> float:
    """Upper limit on the step size for mean-square stability.

    ``min_i 2 E|x_i|^(beta+1) / ((var_x_i + var_n_i) L E|x_i|^(2beta) / E||x_i||_p^p)``.
    Passing ``h0_norm_sq`` keeps the initial deviation ``||h0||^2`` in the
    expression (it weights ``var_x_i`` in the denominator and the numerator).
    """
    _check_model(moments, beta)
    m = moments
    if h0_norm_sq is None:
        num = 2.0 * m.m_beta_plus_1
        power = m.var_x + m.var_n
    else:
        num = 2.0 * m.m_beta_plus_1 * h0_norm_sq
        power = m.var_x * h0_norm_sq + m.var_n
    den = power * taps * m.m_2beta
    if np.any(den <= 0) or np.any(m.m_pnorm <= 0):
        raise EstimationError("zero moment in step-size bound; not enough data?")
    return float(np.min(num * m.m_pnorm / den))


def _msd_terms(moments: SubbandMoments, taps: int):
    m = moments
    if np.any(m.m_pnorm <= 0) or np.any(m.m_pnorm_sq <= 0):
        raise EstimationError("zero p-norm moment in steady-state model")
    weight = m.m_2beta / m.m_pnorm_sq
    noise = taps * np.sum(weight * m.var_n)
    drive = 2.0 * np.sum(m.m_beta_plus_1 / m.m_pnorm)
    excess = taps * np.sum(weight * m.var_x)
    return noise, drive, excess


def steady_state_msd(moments: SubbandMoments, taps: int, mu: float, beta: float) -> float:
    """Steady-state mean-square deviation predicted for step size ``mu``."""
    _check_model(moments, beta)
    if mu <= 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    noise, drive, excess = _msd_terms(moments, taps)
    den = drive - mu * excess
    if den <= 0:
        raise InstabilityError(f"mu={mu} is beyond the steady-state model's stability limit")
    return float(mu * noise / den)


def msd_model_limit(moments: SubbandMoments, taps: int) -> float:
    """Step size at which the steady-state model's denominator vanishes."""
    _, drive, excess = _msd_terms(moments, taps)
    return float(drive / excess) if excess > 0 else math.inf


class _SourceStream:
    def __init__(self, source: Ar1Params, rng):
        self.source = source
        self.rng = rng
        self._zi = np.zeros(1)

    def take(self, count: int) -> np.ndarray:
        white = sample_white(self.source.driving, count, self.rng)
        if self.source.pole == 0.0:
            return white
        y, self._zi = lfilter([1.0], [1.0, -self.source.pole], white, zi=self._zi)
        return y


def default_burn_in(bank: FilterBank, taps: int, source: Ar1Params) -> int:
    settle = 0 if source.pole == 0 else math.ceil(10.0 / (1.0 - source.pole))
    raw = bank.length + taps + settle
    return -(-raw // bank.num_bands) * bank.num_bands


def estimate_moments(
    bank: FilterBank,
    input_source: Ar1Params,
    noise_source: Ar1Params,
    p: float,
    beta: float,
    taps: int,
    sample_count: int = DEFAULT_MOMENT_FRAMES,
    seed: SeedLike = 0,
    burn_in: Optional[int] = None,
    chunk_frames: int = 65_536,
) -> SubbandMoments:
    """Ensemble moments of the subband regressors for the given sources.

    ``sample_count`` is the number of decimated frames that enter the
    p-norm averages; scalar moments and variances use every full-rate band
    sample in the same span.
    """
    if sample_count < 10_000:
        raise EstimationError("at least 1e4 decimated frames are required")
    nb = bank.num_bands
    if burn_in is None:
        burn_in = default_burn_in(bank, taps, input_source)
    burn_in = -(-int(burn_in) // nb) * nb

    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    in_seq, noise_seq = ss.spawn(2)
    x_stream = _SourceStream(input_source, np.random.default_rng(in_seq))
    n_stream = _SourceStream(noise_source, np.random.default_rng(noise_seq))
    x_bands, n_bands = BandFilter(bank), BandFilter(bank)

    tail = np.zeros((nb, taps - 1))
    if burn_in:
        settled = x_bands(x_stream.take(burn_in))
        n_bands(n_stream.take(burn_in))
        keep = min(taps - 1, burn_in)
        if keep:
            tail[:, taps - 1 - keep :] = settled[:, burn_in - keep :]

    acc = {k: np.zeros(nb) for k in ("b1", "b2", "s1", "s2", "n1", "n2", "pn", "pn2")}
    samples = 0
    remaining = int(sample_count)
    with np.errstate(over="ignore"):
        while remaining:
            frames = min(chunk_frames, remaining)
            count = frames * nb
            u = x_bands(x_stream.take(count))
            nz = n_bands(n_stream.take(count))
            au = np.abs(u)
            acc["b1"] += np.sum(au ** (beta + 1.0), axis=1)
            acc["b2"] += np.sum(au ** (2.0 * beta), axis=1)
            acc["s1"] += np.sum(u, axis=1)
            acc["s2"] += np.sum(u * u, axis=1)
            acc["n1"] += np.sum(nz, axis=1)
            acc["n2"] += np.sum(nz * nz, axis=1)
            mag = np.abs(np.concatenate([tail, u], axis=1)) ** p
            csum = np.concatenate([np.zeros((nb, 1)), np.cumsum(mag, axis=1)], axis=1)
            ends = np.arange(frames) * nb + taps
            pn = csum[:, ends] - csum[:, ends - taps]
            acc["pn"] += np.sum(pn, axis=1)
            acc["pn2"] += np.sum(pn * pn, axis=1)
            tail = u[:, u.shape[1] - (taps - 1) :] if taps > 1 else tail
            samples += count
            remaining -= frames

    mean_x = acc["s1"] / samples
    mean_n = acc["n1"] / samples
    heavy = input_source.heavy_tailed or noise_source.heavy_tailed
    if heavy:
        warnings.warn(
            "alpha-stable source: variances and high-order moments are infinite in theory; "
            "returning sample values",
            HeavyTailWarning,
            stacklevel=2,
        )
    return SubbandMoments(
        m_beta_plus_1=acc["b1"] / samples,
        m_2beta=acc["b2"] / samples,
        m_pnorm=acc["pn"] / sample_count,
        m_pnorm_sq=acc["pn2"] / sample_count,
        var_x=np.maximum(acc["s2"] / samples - mean_x**2, 0.0),
        var_n=np.maximum(acc["n2"] / samples - mean_n**2, 0.0),
        p=float(p),
        beta=float(beta),
        taps=int(taps),
        frames=int(sample_count),
        heavy_tail=heavy,
    )
