"""
Centralized rate-distortion function

One encoder sees the whole source vector. The optimal test channel is
reverse water-filling over the source spectrum; for an exchangeable source
the water level only ever crosses one eigenvalue, so the rate, the optimal
distortion matrix and the Shannon lower bound all have closed forms.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from core.exceptions import NumericalError, ParameterRangeError
from core.models import (
    EigenSpectrum,
    ExchangeableMatrix,
    SourceModel,
    log_det,
    source_covariance,
    spectrum,
    validate_distortion,
)

logger = logging.getLogger('gaussmt')


@dataclass(frozen=True)
class WaterfillSolution:
    per_mode: EigenSpectrum
    water_level: float
    rate_nats: float


def rate_from_spectra(source: EigenSpectrum, distortion: EigenSpectrum) -> float:
    """
    1/2 sum_i log(lambda_i / d_i) for two commuting exchangeable matrices

    Modes with d_i == lambda_i contribute exactly zero.
    """
    if source.ell != distortion.ell:
        raise ParameterRangeError(
            f"Spectra of different dimension: {source.ell} vs {distortion.ell}"
        )
    if distortion.bulk <= 0 or distortion.apex <= 0:
        raise NumericalError(
            f"Distortion spectrum must be positive, got bulk={distortion.bulk:.6g}, "
            f"apex={distortion.apex:.6g}"
        )

    def _term(lam: float, d: float) -> float:
        if lam == d:
            return 0.0
        # log1p keeps precision when d is within a few ulps of lam
        return -math.log1p((d - lam) / lam)

    bulk = (source.ell - 1) * _term(source.bulk, distortion.bulk)
    return 0.5 * (bulk + _term(source.apex, distortion.apex))


def shannon_lower_bound(model: SourceModel, d: float) -> float:
    """
    Shannon lower bound 1/2 log(det Sigma / d^ell), in nats
    """
    validate_distortion(d)
    if model.rho == 0:
        return 0.5 * model.ell * math.log(1.0 / d)
    return 0.5 * (log_det(source_covariance(model)) - model.ell * math.log(d))


def distortion_matrix_centralized(model: SourceModel, d: float) -> ExchangeableMatrix:
    """
    Optimal distortion matrix (diagonal d, off-diagonal theta)

    At d equal to the critical distortion both branches give theta = 0; the
    low-distortion branch is taken.
    """
    validate_distortion(d)
    ell, rho = model.ell, model.rho
    if rho == 0 or d <= model.critical:
        theta = 0.0
    elif rho < 0:
        theta = (1.0 - d) / (ell - 1) + rho
    else:
        theta = d - 1.0 + rho
    return ExchangeableMatrix(ell, d, theta)


def rate_centralized(model: SourceModel, d: float) -> float:
    """
    Centralized rate-distortion function R_C(d) in nats

    Below the critical distortion every mode is coded and the rate equals
    the Shannon lower bound. Above it, one group of modes is left uncoded:
    the apex mode when rho < 0, the ell-1 bulk modes when rho > 0.
    """
    validate_distortion(d)
    ell, rho = model.ell, model.rho
    if rho == 0:
        return 0.5 * ell * math.log(1.0 / d)
    if d <= model.critical:
        return shannon_lower_bound(model, d)
    if rho < 0:
        coded = ell * d - 1.0 - (ell - 1) * rho
        return 0.5 * (ell - 1) * math.log((ell - 1) * (1.0 - rho) / coded)
    coded = ell * d - (ell - 1) * (1.0 - rho)
    return 0.5 * math.log((1.0 + (ell - 1) * rho) / coded)


def reverse_waterfill(eigenvalues: np.ndarray, total_distortion: float):
    """
    Reverse water-filling over an arbitrary non-negative spectrum

    Each mode receives min(level, lambda_i), with the level chosen so the
    allocations sum to `total_distortion`.

    Returns:
        (allocation, level) with the allocation in the input order
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n_modes = eigenvalues.size
    if n_modes == 0:
        raise ParameterRangeError("Cannot water-fill an empty spectrum")
    if not (0 < total_distortion < eigenvalues.sum()):
        raise ParameterRangeError(
            f"Total distortion {total_distortion:.6g} must lie in (0, {eigenvalues.sum():.6g})"
        )

    order = np.argsort(eigenvalues)
    ascending = eigenvalues[order]
    # k smallest modes left uncoded, the remaining n-k share the rest equally
    uncoded_mass = np.concatenate(([0.0], np.cumsum(ascending)[:-1]))
    levels = (total_distortion - uncoded_mass) / (n_modes - np.arange(n_modes))
    feasible = np.nonzero(levels <= ascending)[0]
    level = float(levels[feasible[0]])

    allocation = np.minimum(eigenvalues, level)
    return allocation, level


def waterfill(model: SourceModel, d: float) -> WaterfillSolution:
    """
    Run reverse water-filling on the source spectrum at average distortion d
    """
    validate_distortion(d)
    source = spectrum(source_covariance(model))
    allocation, level = reverse_waterfill(source.values(), model.ell * d)
    per_mode = EigenSpectrum(bulk=float(allocation[0]), apex=float(allocation[-1]), ell=model.ell)
    rate = rate_from_spectra(source, per_mode)
    logger.debug(f"waterfill ell={model.ell} rho={model.rho} d={d}: level={level:.6g}")
    return WaterfillSolution(per_mode=per_mode, water_level=level, rate_nats=rate)
