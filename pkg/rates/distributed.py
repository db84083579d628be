"""
Fully distributed rate-distortion function (every encoder sees one source)
"""
import logging
import math
from dataclasses import dataclass

from core.models import (
    EigenSpectrum,
    ExchangeableMatrix,
    SourceModel,
    source_covariance,
    spectrum,
    validate_distortion,
)

from .centralized import rate_from_spectra

logger = logging.getLogger('gaussmt')


@dataclass(frozen=True)
class DistributedSolution:
    """
    Optimal Gaussian test channel for ell separate encoders

    `gamma` is the per-encoder test-channel noise variance, `theta` the
    off-diagonal of the resulting distortion matrix.
    """
    ell: int
    d: float
    xi: float
    gamma: float
    theta: float
    rate_nats: float

    @property
    def distortion_matrix(self) -> ExchangeableMatrix:
        return ExchangeableMatrix(self.ell, self.d, self.theta)

    @property
    def distortion_spectrum(self) -> EigenSpectrum:
        return spectrum(self.distortion_matrix)


def distributed_gamma(model: SourceModel, d: float):
    """
    Positive root of (1-d) gamma^2 + xi gamma - (1-rho)(1+(ell-1)rho) d = 0

    Returns:
        (xi, gamma)
    """
    ell, rho = model.ell, model.rho
    product = (1.0 - rho) * (1.0 + (ell - 1) * rho)
    xi = (1.0 + (ell - 1) * rho) * (1.0 - rho - d) - (1.0 - rho) * d
    root = math.sqrt(xi * xi + 4.0 * product * d * (1.0 - d))
    if xi > 0:
        gamma = 2.0 * product * d / (root + xi)
    else:
        gamma = (root - xi) / (2.0 * (1.0 - d))
    return xi, gamma


def rate_distributed(model: SourceModel, d: float) -> DistributedSolution:
    """
    R^(ell,1)(d): each source coded separately, jointly decoded (Berger-Tung is tight)
    """
    validate_distortion(d)
    ell, rho = model.ell, model.rho
    xi, gamma = distributed_gamma(model, d)

    if rho == 0:
        return DistributedSolution(
            ell=ell, d=d, xi=xi, gamma=gamma, theta=0.0,
            rate_nats=0.5 * ell * math.log(1.0 / d),
        )

    product = (1.0 - rho) * (1.0 + (ell - 1) * rho)
    theta = rho * d * gamma / (gamma + product)
    distortion = spectrum(ExchangeableMatrix(ell, d, theta))
    rate = rate_from_spectra(spectrum(source_covariance(model)), distortion)
    logger.debug(f"rate_distributed ell={ell} rho={rho} d={d}: gamma={gamma:.6g} theta={theta:.6g}")
    return DistributedSolution(ell=ell, d=d, xi=xi, gamma=gamma, theta=theta, rate_nats=rate)
