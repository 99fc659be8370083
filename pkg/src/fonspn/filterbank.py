"""Cosine-modulated analysis filter banks and critically decimated subband analysis."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import lfilter

GRID_POINTS = 1024


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class FilterBank:
    """``num_bands`` analysis filters of ``length`` taps, decimated by ``num_bands``."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DesignError("coeffs must be a non-empty (num_bands, length) array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def num_bands(self) -> int:
        return self.coeffs.shape[0]

    @property
    def length(self) -> int:
        return self.coeffs.shape[1]

    @property
    def decimation(self) -> int:
        return self.num_bands

    def band_energy(self) -> np.ndarray:
        """Squared l2 norm of every analysis filter."""
        return np.sum(self.coeffs**2, axis=1)

    def frequency_response(self, n_grid: int = GRID_POINTS):
        """Responses on ``n_grid`` points of [0, pi]; returns ``(omega, F)`` with F of shape (N, n_grid)."""
        omega = np.linspace(0.0, np.pi, n_grid)
        kernel = np.exp(-1j * np.outer(np.arange(self.length), omega))
        return omega, self.coeffs @ kernel

    def power_sum(self, n_grid: int = GRID_POINTS):
        omega, resp = self.frequency_response(n_grid)
        return omega, np.sum(np.abs(resp) ** 2, axis=0)


@dataclass
class SubbandFrame:
    """Regressors ``(N, L)`` and desired samples ``(N,)`` at decimated time ``frame_index``."""

    band_inputs: np.ndarray
    band_desired: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        self.band_inputs = np.atleast_2d(np.asarray(self.band_inputs, dtype=float))
        self.band_desired = np.atleast_1d(np.asarray(self.band_desired, dtype=float))
        if self.band_inputs.shape[0] != self.band_desired.shape[0]:
            raise ValueError(
                f"{self.band_inputs.shape[0]} regressors but {self.band_desired.shape[0]} desired samples"
            )

    @property
    def num_bands(self) -> int:
        return self.band_inputs.shape[0]

    @property
    def taps(self) -> int:
        return self.band_inputs.shape[1]


def _modulate(prototype: np.ndarray, num_bands: int) -> np.ndarray:
    length = prototype.size
    centred = np.arange(length) - (length - 1) / 2.0
    bands = np.empty((num_bands, length))
    for i in range(1, num_bands + 1):
        phase = (2 * i - 1) * (np.pi / (2 * num_bands)) * centred + (-1) ** (i - 1) * np.pi / 4
        bands[i - 1] = 2.0 * prototype * np.cos(phase)
    return bands


def _prototype(length: int, cutoff: float) -> np.ndarray:
    centred = np.arange(length) - (length - 1) / 2.0
    p = (cutoff / np.pi) * np.sinc(cutoff / np.pi * centred) * np.hamming(length)
    return p / p.sum()


def _ripple(bank: np.ndarray, num_bands: int) -> float:
    _, power = FilterBank(bank).power_sum()
    omega = np.linspace(0.0, np.pi, power.size)
    mid = np.interp(np.pi / (2 * num_bands), omega, power)
    return float(np.max(np.abs(power / mid - 1.0)))


@functools.lru_cache(maxsize=32)
def _design(num_bands: int, length: int) -> tuple[np.ndarray, float]:
    if num_bands == 1:
        impulse = np.zeros(length)
        impulse[0] = 1.0
        return impulse[None, :], np.pi

    nominal = np.pi / (2 * num_bands)

    def ripple_at(scale):
        return _ripple(_modulate(_prototype(length, scale * nominal), num_bands), num_bands)

    # the bare pi/(2N) cutoff leaves a ~50% dip at band crossovers
    res = minimize_scalar(ripple_at, bounds=(0.8, 1.6), method="bounded", options={"xatol": 1e-6})
    cutoff = float(res.x) * nominal
    return _modulate(_prototype(length, cutoff), num_bands), cutoff


def design_bank(num_bands: int, length: int) -> FilterBank:
    """Pseudo-QMF analysis bank from a Hamming-windowed-sinc prototype.

    ``f_i[n] = 2 p[n] cos((2i-1) pi/(2N) (n - (D-1)/2) + (-1)^(i-1) pi/4)``.
    The prototype has unit DC gain and its cutoff is tuned near ``pi/(2N)`` so
    that ``sum_i |F_i|^2`` is flat; this also makes ``sum_i ||f_i||^2 ~= 1``.
    With ``num_bands=1`` the bank is a unit impulse and subband processing
    reduces to the fullband algorithm.
    """
    if int(num_bands) != num_bands or num_bands < 1:
        raise DesignError(f"num_bands must be a positive integer, got {num_bands}")
    if int(length) != length or length < 1:
        raise DesignError(f"length must be a positive integer, got {length}")
    num_bands, length = int(num_bands), int(length)
    if length % (2 * num_bands):
        raise DesignError(f"length {length} is not a multiple of 2*num_bands = {2 * num_bands}")
    coeffs, _ = _design(num_bands, length)
    return FilterBank(coeffs.copy())


def prototype_cutoff(num_bands: int, length: int) -> float:
    """Cutoff (rad/sample) of the prototype used by :func:`design_bank`."""
    design_bank(num_bands, length)
    return _design(int(num_bands), int(length))[1]


def decompose(bank: FilterBank, signal) -> np.ndarray:
    """Full-rate band signals ``(N, T)``; the signal is taken to be zero before index 0."""
    x = np.asarray(signal, dtype=float)
    out = np.zeros((bank.num_bands, x.size))
    if x.size == 0:
        return out
    for i, f in enumerate(bank.coeffs):
        out[i] = lfilter(f, [1.0], x)
    return out


class BandFilter:
    """Streaming version of :func:`decompose` that carries delay lines across chunks."""

    def __init__(self, bank: FilterBank):
        self.bank = bank
        self._zi = np.zeros((bank.num_bands, bank.length - 1))

    def __call__(self, chunk) -> np.ndarray:
        x = np.asarray(chunk, dtype=float)
        out = np.empty((self.bank.num_bands, x.size))
        if x.size == 0:
            return out
        if self.bank.length == 1:
            return self.bank.coeffs[:, :1] * x
        for i, f in enumerate(self.bank.coeffs):
            out[i], self._zi[i] = lfilter(f, [1.0], x, zi=self._zi[i])
        return out


def num_frames(signal_length: int, num_bands: int) -> int:
    """Frames available from ``signal_length`` samples; frame k sits at sample k*N."""
    return -(-int(signal_length) // int(num_bands))


def pad_history(bands: np.ndarray, taps: int) -> np.ndarray:
    """Prepend ``taps - 1`` zeros so that a regressor ending at sample t is ``padded[:, t:t+taps]`` reversed."""
    return np.concatenate([np.zeros((bands.shape[0], taps - 1)), bands], axis=1)


def regressors(padded: np.ndarray, t: int, taps: int) -> np.ndarray:
    """Rows ``[u_i[t], u_i[t-1], ..., u_i[t-L+1]]`` from a :func:`pad_history` array."""
    return padded[:, t : t + taps][:, ::-1]


def analyze(bank: FilterBank, fullband, taps: int, desired=None) -> Iterator[SubbandFrame]:
    """Yield one :class:`SubbandFrame` per ``N`` fullband samples.

    Regressors are drawn from the undecimated band signals of ``fullband``;
    desired samples are the decimated band signals of ``desired`` (or of
    ``fullband`` itself when ``desired`` is omitted).  The generator simply
    ends when the samples run out.
    """
    if taps < 1:
        raise ValueError("taps must be positive")
    x = np.asarray(fullband, dtype=float)
    d = x if desired is None else np.asarray(desired, dtype=float)
    if d.shape != x.shape:
        raise ValueError("desired and fullband must have the same length")
    n = bank.num_bands
    padded = pad_history(decompose(bank, x), taps)
    d_sub = decompose(bank, d)[:, ::n] if desired is not None else None
    for k in range(num_frames(x.size, n)):
        t = k * n
        reg = regressors(padded, t, taps)
        des = d_sub[:, k] if d_sub is not None else reg[:, 0].copy()
        yield SubbandFrame(reg.copy(), des, k)


def decimated(bank: FilterBank, signal) -> np.ndarray:
    """Critically decimated band outputs ``(N, ceil(T/N))``."""
    return decompose(bank, signal)[:, :: bank.num_bands]
