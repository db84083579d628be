import math

from django.test import SimpleTestCase

from core.exceptions import ParameterRangeError
from core.models import SourceModel
from rates.bounds import upper_bound_rate
from rates.centralized import rate_centralized

from .expansions import (
    ORDER_INV_ELL,
    ORDER_INV_SQRT_ELL,
    Regime,
    centralized_expansion,
    classify_regime,
    dcm_limit,
    delta_gap,
    expansion_rate,
    per_encoder_limit,
    theta_expansion,
)

ELLS = (100, 1000, 10000)


def bound(ell, m, rho, d):
    return upper_bound_rate(SourceModel(ell, rho), m, d)


class ThresholdTest(SimpleTestCase):

    def test_dcm_limit(self):
        self.assertAlmostEqual(dcm_limit(2, 0.6), 0.2, places=14)
        self.assertAlmostEqual(dcm_limit(3, 0.6), 4 / 15, places=14)
        self.assertEqual(dcm_limit(1, 0.4), 0.0)
        self.assertAlmostEqual(dcm_limit(2, 0.3), 0.35, places=14)
        self.assertAlmostEqual(dcm_limit(3, 0.3), 7 / 15, places=14)
        self.assertAlmostEqual(dcm_limit(4, 0.3), 0.525, places=14)
        self.assertAlmostEqual(dcm_limit(10 ** 6, 0.3), 0.7, places=5)

    def test_dcm_limit_rejects(self):
        with self.assertRaises(ParameterRangeError):
            dcm_limit(2, 0.0)
        with self.assertRaises(ParameterRangeError):
            dcm_limit(0, 0.5)

    def test_classify_regime(self):
        self.assertIs(classify_regime(2, 0.6, 0.1), Regime.BELOW)
        self.assertIs(classify_regime(2, 0.6, 0.2), Regime.BELOW)
        self.assertIs(classify_regime(2, 0.6, 0.3), Regime.BETWEEN)
        self.assertIs(classify_regime(2, 0.6, 1 - 0.6), Regime.AT_CRITICAL)
        self.assertIs(classify_regime(2, 0.6, 0.7), Regime.ABOVE)
        self.assertIs(classify_regime(1, 0.6, 0.2), Regime.BETWEEN)
        with self.assertRaises(ParameterRangeError):
            classify_regime(2, -0.2, 0.3)


class ExpansionRateTest(SimpleTestCase):

    def test_below_regime_value(self):
        value = expansion_rate(100, 2, 0.6, 0.1)
        expected = 50 * math.log(4.0) + 0.5 * math.log(100) + 0.5 * math.log(1.5)
        self.assertAlmostEqual(value.value_nats, expected, places=10)
        self.assertEqual(value.order_dropped, ORDER_INV_ELL)
        self.assertTrue(value.tight)

    def test_above_regime_example(self):
        value = expansion_rate(10000, 1, 0.6, 0.5)
        self.assertIs(value.regime, Regime.ABOVE)
        self.assertAlmostEqual(value.value_nats, 2.56255, places=4)
        self.assertTrue(value.tight)

    def test_at_critical_leading_term(self):
        value = expansion_rate(10000, 2, 0.6, 1 - 0.6)
        self.assertEqual(value.order_dropped, ORDER_INV_SQRT_ELL)
        self.assertFalse(value.tight)
        self.assertAlmostEqual(value.value_nats / (math.sqrt(10000) / (2 * math.sqrt(2))), 1.0, delta=0.1)

    def test_rejects_small_ell(self):
        with self.assertRaises(ParameterRangeError):
            expansion_rate(3, 4, 0.6, 0.3)

    def assert_inverse_ell_residual(self, m, rho, d):
        scaled = []
        for ell in ELLS:
            residual = abs(bound(ell, m, rho, d).rate_nats - expansion_rate(ell, m, rho, d).value_nats)
            scaled.append(ell * residual)
        self.assertLess(scaled[-1] / ELLS[-1], 1e-2, msg=f"m={m} rho={rho} d={d}: {scaled}")
        self.assertLessEqual(scaled[-1], 2.0 * max(scaled[0], scaled[1]) + 1e-6, msg=f"m={m} rho={rho} d={d}: {scaled}")

    def test_residual_scaling_below(self):
        for m in (2, 3):
            for rho in (0.3, 0.6):
                self.assert_inverse_ell_residual(m, rho, 0.5 * dcm_limit(m, rho))

    def test_residual_scaling_between(self):
        self.assert_inverse_ell_residual(1, 0.6, 0.2)
        self.assert_inverse_ell_residual(2, 0.6, 0.3)
        self.assert_inverse_ell_residual(2, 0.3, 0.5)

    def test_residual_scaling_above(self):
        self.assert_inverse_ell_residual(1, 0.6, 0.5)
        self.assert_inverse_ell_residual(2, 0.6, 0.7)
        self.assert_inverse_ell_residual(3, 0.3, 0.85)

    def test_residual_scaling_at_critical(self):
        for m in (1, 2):
            scaled = []
            for ell in ELLS:
                d = 1 - 0.6
                residual = abs(bound(ell, m, 0.6, d).rate_nats - expansion_rate(ell, m, 0.6, d).value_nats)
                scaled.append(math.sqrt(ell) * residual)
            self.assertLessEqual(max(scaled), 10.0, msg=f"m={m}: {scaled}")
            self.assertLessEqual(scaled[-1], 3.0 * scaled[0] + 1e-6, msg=f"m={m}: {scaled}")

    def test_theta_expansion(self):
        ell = 10000
        for m, rho, d in ((1, 0.6, 0.2), (2, 0.6, 0.3), (1, 0.6, 0.5), (2, 0.6, 0.7), (1, 0.6, 0.4), (2, 0.6, 0.4)):
            if abs(d - (1 - rho)) < 1e-12:
                d = 1 - rho
            expected = bound(ell, m, rho, d).theta
            self.assertAlmostEqual(theta_expansion(ell, m, rho, d).value_nats / expected, 1.0, delta=1e-2,
                                   msg=f"m={m} rho={rho} d={d}")
        below = theta_expansion(ell, 2, 0.6, 0.1)
        self.assertEqual(below.value_nats, 0.0)
        self.assertEqual(bound(ell, 2, 0.6, 0.1).theta, 0.0)


class CentralizedExpansionTest(SimpleTestCase):

    def test_matches_centralized_rate(self):
        ell = 10000
        for rho, d in ((0.3, 0.5), (0.3, 0.8), (0.6, 0.2), (0.6, 1 - 0.6)):
            exact = rate_centralized(SourceModel(ell, rho), d)
            self.assertLess(abs(centralized_expansion(ell, rho, d).value_nats - exact), 5.0 / ell,
                            msg=f"rho={rho} d={d}")

    def test_regimes(self):
        self.assertIs(centralized_expansion(100, 0.3, 0.5).regime, Regime.BELOW_CRITICAL)
        self.assertIs(centralized_expansion(100, 0.3, 0.8).regime, Regime.ABOVE)
        self.assertAlmostEqual(centralized_expansion(100, 0.3, 0.8).value_nats, 0.5 * math.log(3.0), places=12)


class GapTest(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(delta_gap(3, 0.6, 0.2), 0.0)
        self.assertAlmostEqual(delta_gap(1, 0.6, 0.5), 0.2 / 0.12, places=12)
        self.assertTrue(math.isinf(delta_gap(2, 0.6, 1 - 0.6)))
        self.assertGreater(delta_gap(2, 0.6, 0.4 - 1e-6), 100.0)

    def test_limit_of_bound_minus_centralized(self):
        ell = 10000
        for m, rho, d in ((1, 0.6, 0.5), (1, 0.6, 0.2), (2, 0.6, 0.3), (2, 0.6, 0.7), (3, 0.3, 0.6)):
            model = SourceModel(ell, rho)
            gap = upper_bound_rate(model, m, d).rate_nats - rate_centralized(model, d)
            self.assertAlmostEqual(gap, delta_gap(m, rho, d), delta=0.01, msg=f"m={m} rho={rho} d={d}")

    def test_non_increasing_in_m(self):
        for rho in (0.3, 0.6):
            for d in (0.05, 0.15, 0.25, 0.35, 0.5, 0.65, 0.8, 0.95):
                if abs(d - (1 - rho)) < 1e-9:
                    continue
                gaps = [delta_gap(m, rho, d) for m in range(1, 9)]
                for a, b in zip(gaps, gaps[1:]):
                    self.assertGreaterEqual(a, b - 1e-12)
                self.assertLess(delta_gap(10 ** 6, rho, d), 1e-3)

    def test_per_encoder_limit(self):
        self.assertAlmostEqual(per_encoder_limit(2, 0.6, 0.2), 0.5 * math.log(2), places=14)
        self.assertEqual(per_encoder_limit(2, 0.6, 0.7), 0.0)
        self.assertAlmostEqual(per_encoder_limit(1, 1e-9, 0.5), 0.5 * math.log(2), places=8)
        ell = 10000
        for m in (1, 2, 5):
            per_encoder = bound(ell, m, 0.6, 0.2).rate_nats / ell
            self.assertAlmostEqual(per_encoder, per_encoder_limit(m, 0.6, 0.2), delta=1e-3)
