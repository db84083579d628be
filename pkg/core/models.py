"""
Source model and exchangeable-matrix algebra for gaussmt
Every covariance and distortion matrix in this project has a constant
diagonal and a constant off-diagonal, so matrices are stored as
(ell, diag, off) triples and their spectra are known in closed form.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, ParameterRangeError

logger = logging.getLogger('gaussmt')

# rho closer than this to either end of its admissible interval is rejected
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class ExchangeableMatrix:
    """
    ell x ell matrix with `diag` on the diagonal and `off` everywhere else
    """
    ell: int
    diag: float
    off: float

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 1:
            raise ParameterRangeError(f"Matrix dimension must be a positive integer, got {self.ell}")

    @property
    def is_positive_definite(self) -> bool:
        bulk, apex = self.diag - self.off, self.diag + (self.ell - 1) * self.off
        return bulk > 0 and apex > 0

    def to_dense(self) -> np.ndarray:
        """Explicit matrix; only verification code should need this."""
        dense = np.full((self.ell, self.ell), float(self.off))
        np.fill_diagonal(dense, float(self.diag))
        return dense


@dataclass(frozen=True)
class EigenSpectrum:
    """
    Spectrum of an exchangeable matrix: `bulk` repeated ell-1 times, then `apex`
    """
    bulk: float
    apex: float
    ell: int

    def values(self) -> np.ndarray:
        """Eigenvalues ordered as bulk (ell-1 copies) followed by apex."""
        return np.append(np.full(self.ell - 1, float(self.bulk)), float(self.apex))

    def trace(self) -> float:
        return (self.ell - 1) * self.bulk + self.apex

    def mean(self) -> float:
        return self.trace() / self.ell


@dataclass(frozen=True)
class SourceModel:
    """
    ell unit-variance Gaussian sources with common correlation coefficient rho
    """
    ell: int
    rho: float

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 2:
            raise ParameterRangeError(f"ell must be an integer >= 2, got {self.ell}")
        lower = -1.0 / (self.ell - 1)
        if not (lower + BOUNDARY_TOL < self.rho < 1.0 - BOUNDARY_TOL):
            raise ParameterRangeError(
                f"rho={self.rho} outside ({lower:.6g}, 1) for ell={self.ell}; "
                f"the source covariance would not be positive definite"
            )

    @property
    def critical_minus(self) -> float:
        """Smallest source eigenvalue when rho <= 0."""
        return 1.0 + (self.ell - 1) * self.rho

    @property
    def critical_plus(self) -> float:
        """Smallest source eigenvalue when rho > 0."""
        return 1.0 - self.rho

    @property
    def critical(self) -> float:
        """The critical distortion that applies to this rho."""
        return self.critical_minus if self.rho <= 0 else self.critical_plus

    @property
    def covariance(self) -> ExchangeableMatrix:
        return ExchangeableMatrix(self.ell, 1.0, self.rho)


def source_covariance(model: SourceModel) -> ExchangeableMatrix:
    """
    Covariance of the source vector: unit diagonal, rho off the diagonal
    """
    covariance = model.covariance
    if not covariance.is_positive_definite:
        # SourceModel already guards this; kept for models built by other means
        raise ParameterRangeError(f"Source covariance for {model} is not positive definite")
    return covariance


def spectrum(mat: ExchangeableMatrix) -> EigenSpectrum:
    """
    Closed-form eigenvalues: a-b with multiplicity ell-1 and a+(ell-1)b
    """
    return EigenSpectrum(
        bulk=mat.diag - mat.off,
        apex=mat.diag + (mat.ell - 1) * mat.off,
        ell=mat.ell,
    )


def log_det(mat: ExchangeableMatrix) -> float:
    """
    Natural log of the determinant, (ell-1)log(a-b) + log(a+(ell-1)b)
    """
    eig = spectrum(mat)
    if eig.bulk <= 0 or eig.apex <= 0:
        raise NumericalError(
            f"log_det needs a positive definite matrix; spectrum is "
            f"{eig.bulk:.6g} (x{mat.ell - 1}), {eig.apex:.6g}"
        )
    return (mat.ell - 1) * math.log(eig.bulk) + math.log(eig.apex)


def validate_distortion(d: float) -> float:
    """
    Reject distortions outside the open interval (0, 1)
    """
    if not (0.0 < d < 1.0):
        raise ParameterRangeError(f"Distortion must lie in (0, 1), got {d}")
    return float(d)


def validate_subset_size(model: SourceModel, m: int) -> int:
    """
    Encoders observe size-m subsets, 1 <= m <= ell
    """
    if int(m) != m or not (1 <= m <= model.ell):
        raise ParameterRangeError(f"Subset size m must be an integer in [1, {model.ell}], got {m}")
    return int(m)
