"""Seedable generators for Gaussian, symmetric alpha-stable and AR(1) signals.

Every generator is a pure function of ``(params, count, seed)``.  ``seed`` may
be an int, a :class:`numpy.random.SeedSequence` or an existing
:class:`numpy.random.Generator`; Monte Carlo trials obtain independent
substreams with :func:`substream`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.signal import lfilter

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

# spawn-key slots used by the harness
STREAM_INPUT = 0
STREAM_NOISE = 1


class ParameterError(ValueError):
    """A parameter lies outside its admissible domain."""


@dataclass(frozen=True)
class AlphaStableParams:
    """Symmetric alpha-stable law with characteristic function exp(-zeta |t|^alpha)."""

    alpha: float
    zeta: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ParameterError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.zeta > 0.0:
            raise ParameterError(f"zeta must be positive, got {self.zeta}")

    @property
    def scale(self) -> float:
        """Scale of the standard CMS variate, zeta ** (1 / alpha)."""
        return self.zeta ** (1.0 / self.alpha)


@dataclass(frozen=True)
class GaussianParams:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance >= 0.0:
            raise ParameterError(f"variance must be non-negative, got {self.variance}")


Driving = Union[GaussianParams, AlphaStableParams]


@dataclass(frozen=True)
class Ar1Params:
    """AR(1) colouring ``y[k] = pole * y[k-1] + w[k]`` of a white driving sequence.

    ``pole=0`` gives the white driving sequence itself, so this type doubles as
    the generic signal-source description used by the harness.
    """

    pole: float = 0.0
    driving: Driving = GaussianParams(1.0)

    def __post_init__(self):
        if not (0.0 <= self.pole < 1.0):
            raise ParameterError(f"AR(1) pole must lie in [0, 1), got {self.pole}")

    @property
    def heavy_tailed(self) -> bool:
        return isinstance(self.driving, AlphaStableParams) and self.driving.alpha < 2.0


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, *key)``, e.g. ``(seed, trial, STREAM_NOISE)``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def _check_count(count):
    if int(count) != count or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count}")
    return int(count)


def sample_sas(params: AlphaStableParams, count: int, seed: SeedLike) -> np.ndarray:
    """Draw ``count`` symmetric alpha-stable variates (Chambers-Mallows-Stuck).

    The variates are scaled by ``zeta ** (1/alpha)`` so that their
    characteristic function is exactly ``exp(-zeta |t|^alpha)``.
    """
    if not isinstance(params, AlphaStableParams):
        raise ParameterError("params must be an AlphaStableParams instance")
    count = _check_count(count)
    rng = make_rng(seed)
    a = params.alpha
    phi = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=count)
    w = rng.standard_exponential(size=count)
    if a == 1.0:
        x = np.tan(phi)
    else:
        cos_phi = np.cos(phi)
        x = (np.sin(a * phi) / cos_phi ** (1.0 / a)) * (np.cos((1.0 - a) * phi) / w) ** ((1.0 - a) / a)
    return params.scale * x


def sample_gaussian(variance: float, count: int, seed: SeedLike) -> np.ndarray:
    if not variance >= 0.0:
        raise ParameterError(f"variance must be non-negative, got {variance}")
    count = _check_count(count)
    rng = make_rng(seed)
    return np.sqrt(variance) * rng.standard_normal(count)


def sample_white(driving: Driving, count: int, seed: SeedLike) -> np.ndarray:
    if isinstance(driving, AlphaStableParams):
        return sample_sas(driving, count, seed)
    if isinstance(driving, GaussianParams):
        return sample_gaussian(driving.variance, count, seed)
    raise ParameterError(f"unknown driving noise descriptor {driving!r}")


def color_ar1(white, params: Ar1Params) -> np.ndarray:
    """Filter ``white`` through ``1 / (1 - pole z^-1)`` starting from rest."""
    white = np.asarray(white, dtype=float)
    if white.ndim != 1 or white.size == 0:
        raise ParameterError("color_ar1 needs a non-empty 1-D input")
    if params.pole == 0.0:
        return white.copy()
    return lfilter([1.0], [1.0, -params.pole], white)


def generate(source: Ar1Params, count: int, seed: SeedLike) -> np.ndarray:
    """Driving noise of ``source`` coloured by its AR(1) pole."""
    return color_ar1(sample_white(source.driving, count, seed), source)
