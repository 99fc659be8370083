"""Preset experiments: Gaussian validation of the theory and the two impulsive scenarios."""

from __future__ import annotations

from typing import Optional

from .adaptive import AlgoConfig
from .harness import ExperimentConfig
from .signalgen import AlphaStableParams, Ar1Params, GaussianParams
from .theory import DEFAULT_MOMENT_FRAMES, SubbandMoments, estimate_moments

AR_POLE = 0.999
TAPS = 20
GAUSSIAN_NOISE_VAR = 1e-3
IMPULSIVE_NOISE = AlphaStableParams(0.75, 1 / 60)
CAUCHY_INPUT = AlphaStableParams(1.0, 1 / 10)
IMPULSIVE_P = 0.7
# one step size shared by every algorithm in the impulsive comparisons
IMPULSIVE_MU = 0.03


def gaussian_identification(mu: float = 0.5, trials: int = 50, total_samples: int = 200_000, seed: int = 0) -> ExperimentConfig:
    """AR(1)-coloured Gaussian input, Gaussian noise, unit-norm h0, NSAF (p=2, beta=1)."""
    return ExperimentConfig(
        AlgoConfig("NSAF", mu=mu, taps=TAPS),
        input_source=Ar1Params(AR_POLE, GaussianParams(1.0)),
        noise_source=Ar1Params(0.0, GaussianParams(GAUSSIAN_NOISE_VAR)),
        trials=trials,
        total_samples=total_samples,
        unit_norm=True,
        master_seed=seed,
    )


def _impulsive_algo(algorithm: str, beta: float, mu: float) -> AlgoConfig:
    # strict=False admits beta > p, which the comparison runs on purpose
    return AlgoConfig(algorithm, mu=mu, p=IMPULSIVE_P, beta=beta, taps=TAPS, strict=False)


def impulsive_noise(
    algorithm: str = "FoNSPN", beta: float = 0.65, mu: float = IMPULSIVE_MU, trials: int = 50,
    total_samples: int = 100_000, seed: int = 0,
) -> ExperimentConfig:
    """AR(1) Gaussian input with alpha=0.75, zeta=1/60 additive noise."""
    return ExperimentConfig(
        _impulsive_algo(algorithm, beta, mu),
        input_source=Ar1Params(AR_POLE, GaussianParams(1.0)),
        noise_source=Ar1Params(0.0, IMPULSIVE_NOISE),
        trials=trials,
        total_samples=total_samples,
        master_seed=seed,
    )


def cauchy_input(
    algorithm: str = "FoNSPN", beta: float = 0.65, mu: float = IMPULSIVE_MU, trials: int = 50,
    total_samples: int = 100_000, flip: bool = True, seed: int = 0,
) -> ExperimentConfig:
    """AR(1)-coloured Cauchy input (alpha=1, zeta=1/10), impulsive noise, optional mid-run flip."""
    return ExperimentConfig(
        _impulsive_algo(algorithm, beta, mu),
        input_source=Ar1Params(AR_POLE, CAUCHY_INPUT),
        noise_source=Ar1Params(0.0, IMPULSIVE_NOISE),
        trials=trials,
        total_samples=total_samples,
        flip_at=total_samples // 2 if flip else None,
        master_seed=seed,
    )


def config_moments(cfg: ExperimentConfig, sample_count: int = DEFAULT_MOMENT_FRAMES, seed: Optional[int] = None) -> SubbandMoments:
    """Subband moments for the sources, bank and (p, beta, L) of ``cfg``."""
    a = cfg.algo
    return estimate_moments(
        cfg.bank(), cfg.input_source, cfg.noise_source, a.p, a.beta, a.taps, sample_count,
        seed=cfg.master_seed + 7919 if seed is None else seed,
    )
