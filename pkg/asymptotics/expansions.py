"""
Large-ell expansions of the (ell, m) upper bound and of the centralized rate

For fixed m and rho in (0, 1), the upper bound behaves differently in four
distortion regimes split by d_c^(m) = (m-1)(1-rho)/m and d_c^+ = 1-rho.
Each expansion drops terms of the order recorded in `order_dropped`.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

from core.exceptions import ParameterRangeError

logger = logging.getLogger('gaussmt')

# boundary comparisons resolve toward the lower regime within this slack
REGIME_TOL = 1e-12

ORDER_INV_ELL = 'O(1/ell)'
ORDER_INV_SQRT_ELL = 'O(1/sqrt(ell))'


class Regime(str, Enum):
    BELOW = 'below-dcm'
    BETWEEN = 'between'
    # centralized rate only: every d below d_c^+
    BELOW_CRITICAL = 'below-critical'
    AT_CRITICAL = 'at-critical'
    ABOVE = 'above-critical'


@dataclass(frozen=True)
class ExpansionValue:
    value_nats: float
    regime: Regime
    order_dropped: str
    tight: bool


def _validate(m: int, rho: float, d: float, ell: int = None) -> None:
    if int(m) != m or m < 1:
        raise ParameterRangeError(f"m must be a positive integer, got {m}")
    if not (0.0 < rho < 1.0):
        raise ParameterRangeError(f"Expansions need rho in (0, 1), got {rho}")
    if not (0.0 < d < 1.0):
        raise ParameterRangeError(f"Distortion must lie in (0, 1), got {d}")
    if ell is not None and (int(ell) != ell or ell < max(2, m)):
        raise ParameterRangeError(f"ell must be an integer >= max(2, m), got {ell}")


def dcm_limit(m: int, rho: float) -> float:
    """
    Limit of d_c^(ell,m) as ell grows: (m-1)(1-rho)/m
    """
    if int(m) != m or m < 1:
        raise ParameterRangeError(f"m must be a positive integer, got {m}")
    if not (0.0 < rho < 1.0):
        raise ParameterRangeError(f"dcm_limit needs rho in (0, 1), got {rho}")
    return (m - 1) * (1.0 - rho) / m


def classify_regime(m: int, rho: float, d: float) -> Regime:
    _validate(m, rho, d)
    critical = 1.0 - rho
    if abs(d - critical) <= REGIME_TOL:
        return Regime.AT_CRITICAL
    if d <= dcm_limit(m, rho) + REGIME_TOL:
        return Regime.BELOW
    if d < critical:
        return Regime.BETWEEN
    return Regime.ABOVE


def _leading(ell: int, rho: float, d: float) -> float:
    return 0.5 * ell * math.log((1.0 - rho) / d) + 0.5 * math.log(ell)


def expansion_rate(ell: int, m: int, rho: float, d: float) -> ExpansionValue:
    """
    Large-ell approximation of r^(ell,m)(d)
    """
    _validate(m, rho, d, ell)
    regime = classify_regime(m, rho, d)
    tight = m == 1 or regime is Regime.BELOW

    if regime is Regime.BELOW:
        value = _leading(ell, rho, d) + 0.5 * math.log(rho / (1.0 - rho))
        return ExpansionValue(value, regime, ORDER_INV_ELL, tight)

    if regime is Regime.BETWEEN:
        gap = 1.0 - rho - d
        value = (
            _leading(ell, rho, d)
            + (d - (m - 1) * gap) / (2.0 * m * gap)
            + 0.5 * math.log(m * rho * gap / (1.0 - rho) ** 2)
        )
        return ExpansionValue(value, regime, ORDER_INV_ELL, tight)

    if regime is Regime.AT_CRITICAL:
        value = (
            math.sqrt(ell) / (2.0 * math.sqrt(m))
            + 0.25 * math.log(ell)
            + 0.5 * math.log(math.sqrt(m) * rho / (1.0 - rho))
            - (1.0 + (m - 1) * rho) / (4.0 * m * rho)
        )
        return ExpansionValue(value, regime, ORDER_INV_SQRT_ELL, tight)

    excess = d - 1.0 + rho
    value = 0.5 * math.log(rho / excess) + (1.0 - rho) * (1.0 - d) / (2.0 * m * rho * excess)
    return ExpansionValue(value, regime, ORDER_INV_ELL, tight)


def centralized_expansion(ell: int, rho: float, d: float) -> ExpansionValue:
    """
    Large-ell approximation of R_C(d); at d_c^+ the correction is O(1/ell)
    """
    _validate(1, rho, d, ell)
    critical = 1.0 - rho
    if abs(d - critical) <= REGIME_TOL:
        value = 0.5 * math.log(ell) + 0.5 * math.log(rho / (1.0 - rho))
        return ExpansionValue(value, Regime.AT_CRITICAL, ORDER_INV_ELL, True)
    if d < critical:
        value = _leading(ell, rho, d) + 0.5 * math.log(rho / (1.0 - rho))
        return ExpansionValue(value, Regime.BELOW_CRITICAL, ORDER_INV_ELL, True)
    value = 0.5 * math.log(rho / (d - 1.0 + rho))
    return ExpansionValue(value, Regime.ABOVE, ORDER_INV_ELL, True)


def delta_gap(m: int, rho: float, d: float) -> float:
    """
    Limit of r^(ell,m)(d) - R_C(d) as ell grows; infinite at d_c^+
    """
    regime = classify_regime(m, rho, d)
    if regime is Regime.BELOW:
        return 0.0
    if regime is Regime.AT_CRITICAL:
        return math.inf
    if regime is Regime.BETWEEN:
        gap = 1.0 - rho - d
        return (1.0 - rho - m * gap) / (2.0 * m * gap) + 0.5 * math.log(m * gap / (1.0 - rho))
    excess = d - 1.0 + rho
    return (1.0 - rho) * (1.0 - d) / (2.0 * m * rho * excess)


def per_encoder_limit(m: int, rho: float, d: float) -> float:
    """
    Limit of r^(ell,m)(d) / ell: 1/2 log((1-rho)/d) below d_c^+, zero above
    """
    _validate(m, rho, d)
    if d < 1.0 - rho - REGIME_TOL:
        return 0.5 * math.log((1.0 - rho) / d)
    return 0.0


def theta_expansion(ell: int, m: int, rho: float, d: float) -> ExpansionValue:
    """
    Leading large-ell behaviour of the off-diagonal distortion theta^+
    """
    _validate(m, rho, d, ell)
    regime = classify_regime(m, rho, d)
    tight = m == 1 or regime is Regime.BELOW
    if regime is Regime.BELOW:
        return ExpansionValue(0.0, regime, ORDER_INV_ELL, tight)
    if regime is Regime.BETWEEN:
        gap = 1.0 - rho - d
        value = d * (d - (m - 1) * gap) / (ell * m * gap)
        return ExpansionValue(value, regime, ORDER_INV_ELL, tight)
    if regime is Regime.AT_CRITICAL:
        value = (1.0 - rho) / math.sqrt(ell * m) - (1.0 - rho) * (1.0 + m * rho) / (2.0 * ell * m * rho)
        return ExpansionValue(value, regime, ORDER_INV_SQRT_ELL, tight)
    excess = d - 1.0 + rho
    value = excess + (1.0 - rho) ** 2 * (1.0 - d) / (ell * m * rho * excess)
    return ExpansionValue(value, regime, ORDER_INV_ELL, tight)
