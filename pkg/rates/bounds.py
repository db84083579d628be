"""
Generalized (ell, m) rate-distortion: achievable distortion pairs and the upper bound

Encoders observe every size-m subset of the ell sources. Two symmetric
Gaussian test-channel families are available:

    minus  - each encoder sends m-1 differences (rho <= 0)
    plus   - each encoder sends the sum of its m sources (rho > 0)

Both produce exchangeable distortion matrices whose (diagonal, off-diagonal)
pairs are closed-form functions of the test-channel noise variance gamma.
The eta coefficients contain binomials C(ell-1, m-1) that overflow floats for
large ell, so the plus branch is evaluated with every eta divided by that
binomial (gamma in turn is carried as g = gamma / C(ell-1, m-1)).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from scipy.special import comb, gammaln

from core.exceptions import NumericalError, ParameterRangeError
from core.models import (
    EigenSpectrum,
    ExchangeableMatrix,
    SourceModel,
    source_covariance,
    spectrum,
    validate_distortion,
    validate_subset_size,
)

from .centralized import distortion_matrix_centralized, rate_centralized, rate_from_spectra
from .distributed import rate_distributed

logger = logging.getLogger('gaussmt')

# relative slack when deciding that a mode sits at its source eigenvalue
UNCODED_RTOL = 1e-9


class Justification(str, Enum):
    """Why a value returned by upper_bound_rate is (or is not) the true rate."""
    INDEPENDENT = 'independent-sources'
    CENTRALIZED = 'centralized'
    DISTRIBUTED = 'distributed'
    NON_POSITIVE_CORRELATION = 'non-positive-correlation'
    BELOW_CRITICAL = 'below-critical-distortion'
    UPPER_BOUND = 'upper-bound-only'


class GammaBranch(str, Enum):
    POSITIVE_RHO = 'positive-rho'
    NEGATIVE_RHO = 'negative-rho'


@dataclass(frozen=True)
class EtaCoefficients:
    """
    Plus-branch coefficients, exact and divided by C(ell-1, m-1)

    `eta1_scaled` is eta1 / C(ell-1, m-1)^2 and `eta{2,3,4}_scaled` are
    eta / C(ell-1, m-1). The unscaled values are inf when they overflow.
    """
    ell: int
    m: int
    rho: float
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta1_scaled: float
    eta2_scaled: float
    eta3_scaled: float
    eta4_scaled: float
    log_scale: float

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale) if self.log_scale < 709 else math.inf

    @property
    def overflow(self) -> bool:
        return not all(math.isfinite(v) for v in (self.eta1, self.eta2, self.eta3, self.eta4))


@dataclass(frozen=True)
class GammaSolution:
    """
    Test-channel variance reaching distortion d on the given branch

    `d_check` recomputes the diagonal from gamma; it should reproduce d.
    """
    gamma: float
    gamma_scaled: float
    branch: GammaBranch
    theta: float
    d_check: float


@dataclass(frozen=True)
class BoundResult:
    ell: int
    m: int
    d: float
    rate_nats: float
    theta: float
    exact: bool
    justification: Justification

    @property
    def distortion_matrix(self) -> ExchangeableMatrix:
        return ExchangeableMatrix(self.ell, self.d, self.theta)


@dataclass(frozen=True)
class ExactRate:
    """
    R^(ell,m)(d) when it is known; otherwise the bracket it lies in
    """
    known: bool
    rate_nats: Optional[float]
    justification: Justification
    lower_nats: float
    upper_nats: float


@dataclass(frozen=True)
class BoundSpectrum:
    source: EigenSpectrum
    distortion: EigenSpectrum
    uncoded: Tuple[bool, bool]


def _as_float(value) -> float:
    try:
        return float(value)
    except OverflowError:
        return math.inf


def binomial(n: int, k: int) -> int:
    """
    Exact C(n, k) with C(n, k) = 0 for k < 0 or k > n
    """
    if k < 0 or n < 0 or k > n:
        return 0
    return int(comb(n, k, exact=True))


def log_binomial(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def _binomial_ratios(ell: int, m: int) -> Tuple[float, float]:
    """C(ell-2, m-1) and C(ell-2, m-2), each divided by C(ell-1, m-1)."""
    return (ell - m) / (ell - 1), (m - 1) / (ell - 1)


def _check_gamma(gamma: float) -> float:
    if not (gamma > 0):
        raise ParameterRangeError(f"Test-channel variance gamma must be positive, got {gamma}")
    return float(gamma)


def critical_distortions_pm(model: SourceModel) -> Tuple[float, float]:
    """(d_c^-, d_c^+) = (1 + (ell-1) rho, 1 - rho)"""
    return model.critical_minus, model.critical_plus


def critical_distortion(model: SourceModel, m: int) -> float:
    """
    d_c^(ell,m): the largest distortion at which the plus branch needs no
    extra Wyner-Ziv refinement and the Shannon lower bound is achieved
    """
    m = validate_subset_size(model, m)
    if model.rho <= 0:
        raise ParameterRangeError(f"critical_distortion is defined for rho > 0, got {model.rho}")
    if m == 1:
        return 0.0
    ell, rho = model.ell, model.rho
    numerator = (ell - 1) * rho * (1.0 + (m - 1) * rho)
    denominator = (ell - 1) * m * rho + (m - 1) * (1.0 - rho)
    return 1.0 - numerator / denominator


def critical_gamma_minus(model: SourceModel, m: int) -> float:
    """
    gamma_c^- = -C(ell-2, m-2)(1-rho)(1+(ell-1)rho)/rho, which gives d^- = d_c^-
    """
    m = validate_subset_size(model, m)
    if m < 2 or model.rho >= 0:
        raise ParameterRangeError("critical_gamma_minus needs m >= 2 and rho < 0")
    rho = model.rho
    return -binomial(model.ell - 2, m - 2) * (1.0 - rho) * (1.0 + (model.ell - 1) * rho) / rho


def critical_gamma_plus(model: SourceModel, m: int) -> float:
    """
    gamma_c^+ = C(ell-2, m-2)(1-rho)(1+(ell-1)rho)/rho, which gives theta^+ = 0
    """
    m = validate_subset_size(model, m)
    if m < 2 or model.rho <= 0:
        raise ParameterRangeError("critical_gamma_plus needs m >= 2 and rho > 0")
    rho = model.rho
    return _as_float(binomial(model.ell - 2, m - 2)) * (1.0 - rho) * (1.0 + (model.ell - 1) * rho) / rho


def _scaled_eta(ell: int, m: int, rho: float) -> Tuple[float, float, float, float]:
    keep, drop = _binomial_ratios(ell, m)
    a = 1.0 + (m - 1) * rho
    b = 1.0 + (ell - 2) * rho
    s = 1.0 + (ell - 1) * rho
    e1 = keep * m * (1.0 - rho) * s
    e2 = a + keep * m * b + drop * ((ell - 1) * m * rho + (m - 1) * (1.0 - rho))
    e3 = a + keep * (ell - 1) * m * rho * rho + drop * (ell - 1) * rho * a
    e4 = rho * a + keep * m * rho * b + drop * b * a
    return e1, e2, e3, e4


def _scaled_differences(ell: int, m: int, rho: float) -> Tuple[float, float, float]:
    """
    e2 - e3, e2*rho - e4 and e3 - rho*e2 written without cancellation
    """
    keep, drop = _binomial_ratios(ell, m)
    s = 1.0 + (ell - 1) * rho
    e2_minus_e3 = (1.0 - rho) * s * (keep * m + drop * (m - 1))
    e2rho_minus_e4 = -drop * (1.0 - rho) * s
    e3_minus_rho_e2 = (1.0 - rho) * ((1.0 + (m - 1) * rho) - keep * m * rho + drop * rho * (ell - m))
    return e2_minus_e3, e2rho_minus_e4, e3_minus_rho_e2


def eta_coefficients(model: SourceModel, m: int) -> EtaCoefficients:
    m = validate_subset_size(model, m)
    ell, rho = model.ell, model.rho
    c_keep = binomial(ell - 1, m - 1)
    c_prev = binomial(ell - 2, m - 1)
    c_drop = binomial(ell - 2, m - 2)
    a = 1.0 + (m - 1) * rho
    b = 1.0 + (ell - 2) * rho
    s = 1.0 + (ell - 1) * rho

    def _combine(*terms) -> float:
        try:
            return float(sum(_as_float(coef) * value for coef, value in terms))
        except OverflowError:
            return math.inf

    eta1 = _as_float(c_keep * c_prev * m) * (1.0 - rho) * s
    eta2 = _combine((c_keep, a), (c_prev, m * b), (c_drop, (ell - 1) * m * rho + (m - 1) * (1.0 - rho)))
    eta3 = _combine((c_keep, a), (c_prev, (ell - 1) * m * rho * rho), (c_drop, (ell - 1) * rho * a))
    eta4 = _combine((c_keep, rho * a), (c_prev, m * rho * b), (c_drop, b * a))
    e1, e2, e3, e4 = _scaled_eta(ell, m, rho)
    return EtaCoefficients(
        ell=ell, m=m, rho=rho,
        eta1=eta1, eta2=eta2, eta3=eta3, eta4=eta4,
        eta1_scaled=e1, eta2_scaled=e2, eta3_scaled=e3, eta4_scaled=e4,
        log_scale=log_binomial(ell - 1, m - 1),
    )


def _plus_pair_scaled(model: SourceModel, m: int, g: float) -> Tuple[float, float]:
    ell, rho = model.ell, model.rho
    e1, e2, _, _ = _scaled_eta(ell, m, rho)
    e2_minus_e3, e2rho_minus_e4, _ = _scaled_differences(ell, m, rho)
    denominator = g * g + e2 * g + e1
    d_plus = g * (g + e2_minus_e3) / denominator
    theta_plus = g * (rho * g + e2rho_minus_e4) / denominator
    return d_plus, theta_plus


def d_plus_theta_plus(model: SourceModel, m: int, gamma: float) -> Tuple[float, float]:
    """
    Distortion pair reached by the plus channel with noise variance gamma

    d^+ = 1 - (eta3 gamma + eta1) / (gamma^2 + eta2 gamma + eta1)
    theta^+ = rho - (eta4 gamma + eta1 rho) / (gamma^2 + eta2 gamma + eta1)
    """
    m = validate_subset_size(model, m)
    gamma = _check_gamma(gamma)
    log_scale = log_binomial(model.ell - 1, m - 1)
    g = gamma * math.exp(-log_scale)
    return _plus_pair_scaled(model, m, g)


def d_minus_theta_minus(model: SourceModel, m: int, gamma: float) -> Tuple[float, float]:
    """
    Distortion pair reached by the minus (difference) channel
    """
    m = validate_subset_size(model, m)
    if m < 2:
        raise ParameterRangeError("The minus channel needs m >= 2")
    gamma = _check_gamma(gamma)
    ell, rho = model.ell, model.rho
    c_drop = _as_float(binomial(ell - 2, m - 2))
    h = gamma / c_drop
    denominator = h + ell * (1.0 - rho)
    d_minus = 1.0 - (ell - 1) * (1.0 - rho) ** 2 / denominator
    theta_minus = rho + (1.0 - rho) ** 2 / denominator
    return d_minus, theta_minus


def _plus_root_scaled(model: SourceModel, m: int, d: float) -> float:
    """
    Positive root g of (1-d) g^2 - B g - e1 d = 0, B = e3 - e2 (1-d)
    """
    ell, rho = model.ell, model.rho
    e1, e2, _, _ = _scaled_eta(ell, m, rho)
    _, _, e3_minus_rho_e2 = _scaled_differences(ell, m, rho)
    linear = e3_minus_rho_e2 - e2 * (1.0 - rho - d)
    root = math.sqrt(linear * linear + 4.0 * e1 * d * (1.0 - d))
    if linear >= 0:
        g = (linear + root) / (2.0 * (1.0 - d))
    elif root - linear > 0:
        g = 2.0 * e1 * d / (root - linear)
    else:
        g = 0.0
    if not (g > 0):
        raise ParameterRangeError(
            f"No plus-channel gamma reaches d={d} for ell={ell}, m={m}, rho={rho}"
        )
    return g


def gamma_of_d(model: SourceModel, m: int, d: float) -> GammaSolution:
    """
    Invert d -> gamma on the branch that matches the sign of rho

    rho < 0 uses the minus channel (d in (d_c^-/ell, 1), m >= 2); rho > 0
    solves the plus-channel quadratic. With m = ell the quadratic loses its
    constant term and the plus channel only reaches d > (ell-1)(1-rho)/ell,
    where theta = d - 1 + rho; smaller d raises ParameterRangeError.
    """
    validate_distortion(d)
    m = validate_subset_size(model, m)
    ell, rho = model.ell, model.rho
    if rho == 0:
        raise ParameterRangeError("Independent sources need no test channel (rho = 0)")

    if rho < 0:
        if m < 2:
            raise ParameterRangeError("The minus channel needs m >= 2")
        lower = model.critical_minus / ell
        if not (lower < d < 1.0):
            raise ParameterRangeError(f"Minus channel reaches d in ({lower:.6g}, 1), got {d}")
        c_drop = _as_float(binomial(ell - 2, m - 2))
        h = (1.0 - rho) * ((ell - 1) * (1.0 - rho) - ell * (1.0 - d)) / (1.0 - d)
        gamma = c_drop * h
        d_check, theta = d_minus_theta_minus(model, m, gamma)
        return GammaSolution(gamma=gamma, gamma_scaled=h, branch=GammaBranch.NEGATIVE_RHO,
                             theta=theta, d_check=d_check)

    if m == ell and d <= (ell - 1) * (1.0 - rho) / ell:
        raise ParameterRangeError(
            f"With m = ell the plus channel reaches d in ({(ell - 1) * (1.0 - rho) / ell:.6g}, 1), got {d}"
        )
    g = _plus_root_scaled(model, m, d)
    log_scale = log_binomial(ell - 1, m - 1)
    gamma = g * math.exp(log_scale) if log_scale < 709 else math.inf
    e2_minus_e3, e2rho_minus_e4, _ = _scaled_differences(ell, m, rho)
    # theta at known d, no subtraction of nearly equal terms
    theta = (rho * g + e2rho_minus_e4) * d / (g + e2_minus_e3)
    d_check, _ = _plus_pair_scaled(model, m, g)
    if abs(d_check - d) > 1e-8 * max(1.0, d):
        logger.warning(f"gamma_of_d round trip drifted: d={d} d_check={d_check} (ell={ell}, m={m}, rho={rho})")
    return GammaSolution(gamma=gamma, gamma_scaled=g, branch=GammaBranch.POSITIVE_RHO,
                         theta=theta, d_check=d_check)


def upper_bound_rate(model: SourceModel, m: int, d: float) -> BoundResult:
    """
    Achievable rate r^(ell,m)(d) with an exactness flag

    The value equals R^(ell,m)(d) whenever rho <= 0, d <= d_c^(ell,m), or
    m is 1 or ell; otherwise it is an upper bound.
    """
    validate_distortion(d)
    m = validate_subset_size(model, m)
    ell, rho = model.ell, model.rho

    def _result(theta: float, rate: float, exact: bool, why: Justification) -> BoundResult:
        return BoundResult(ell=ell, m=m, d=d, rate_nats=rate, theta=theta, exact=exact, justification=why)

    if rho == 0:
        return _result(0.0, 0.5 * ell * math.log(1.0 / d), True, Justification.INDEPENDENT)

    if m == 1:
        solution = rate_distributed(model, d)
        return _result(solution.theta, solution.rate_nats, True, Justification.DISTRIBUTED)

    if m == ell or rho < 0:
        matrix = distortion_matrix_centralized(model, d)
        why = Justification.CENTRALIZED if m == ell else Justification.NON_POSITIVE_CORRELATION
        return _result(matrix.off, rate_centralized(model, d), True, why)

    d_critical = critical_distortion(model, m)
    if d <= d_critical:
        theta, exact, why = 0.0, True, Justification.BELOW_CRITICAL
    else:
        theta, exact, why = gamma_of_d(model, m, d).theta, False, Justification.UPPER_BOUND

    distortion = ExchangeableMatrix(ell, d, theta)
    if not distortion.is_positive_definite:
        raise NumericalError(f"Plus-channel distortion matrix ({d}, {theta}) is not positive definite")
    rate = rate_from_spectra(spectrum(source_covariance(model)), spectrum(distortion))
    return _result(theta, rate, exact, why)


def rate_exact(model: SourceModel, m: int, d: float) -> ExactRate:
    """
    R^(ell,m)(d) when one of the exactness conditions holds, else the
    bracket [R_C(d), r^(ell,m)(d)]
    """
    bound = upper_bound_rate(model, m, d)
    lower = rate_centralized(model, d)
    if bound.exact:
        return ExactRate(known=True, rate_nats=bound.rate_nats, justification=bound.justification,
                         lower_nats=lower, upper_nats=bound.rate_nats)
    return ExactRate(known=False, rate_nats=None, justification=bound.justification,
                     lower_nats=lower, upper_nats=bound.rate_nats)


def bound_spectrum(model: SourceModel, m: int, d: float) -> BoundSpectrum:
    """
    Source and distortion eigenvalues of the upper-bound solution, with the
    modes that are left uncoded (d_i == lambda_i) flagged
    """
    bound = upper_bound_rate(model, m, d)
    source = spectrum(source_covariance(model))
    distortion = spectrum(bound.distortion_matrix)

    def _uncoded(lam: float, value: float) -> bool:
        return value >= lam * (1.0 - UNCODED_RTOL)

    return BoundSpectrum(
        source=source,
        distortion=distortion,
        uncoded=(_uncoded(source.bulk, distortion.bulk), _uncoded(source.apex, distortion.apex)),
    )
