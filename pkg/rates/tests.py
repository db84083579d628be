import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ParameterRangeError
from core.models import ExchangeableMatrix, SourceModel, source_covariance, spectrum

from .bounds import (
    GammaBranch,
    Justification,
    binomial,
    bound_spectrum,
    critical_distortion,
    critical_distortions_pm,
    critical_gamma_minus,
    critical_gamma_plus,
    d_minus_theta_minus,
    d_plus_theta_plus,
    eta_coefficients,
    gamma_of_d,
    rate_exact,
    upper_bound_rate,
)
from .centralized import (
    distortion_matrix_centralized,
    rate_centralized,
    rate_from_spectra,
    reverse_waterfill,
    shannon_lower_bound,
    waterfill,
)
from .distributed import rate_distributed

RHO_GRID = (-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9)
D_GRID = tuple(np.linspace(0.02, 0.98, 25))


def valid_models(ell, rhos=RHO_GRID):
    models = []
    for rho in rhos:
        try:
            models.append(SourceModel(ell, rho))
        except ParameterRangeError:
            pass
    return models


class CentralizedRateTest(SimpleTestCase):

    def test_shannon_lower_bound_values(self):
        self.assertAlmostEqual(shannon_lower_bound(SourceModel(2, 0.0), 0.5), math.log(2), places=14)
        self.assertAlmostEqual(shannon_lower_bound(SourceModel(3, 0.6), 0.4), 0.5 * math.log(0.352 / 0.064), places=12)
        self.assertAlmostEqual(shannon_lower_bound(SourceModel(2, 0.5), 0.3), 0.5 * math.log(0.75 / 0.09), places=12)
        self.assertAlmostEqual(shannon_lower_bound(SourceModel(2, 0.5), 0.3), 1.06009, delta=1e-4)

    def test_rate_examples(self):
        self.assertAlmostEqual(rate_centralized(SourceModel(2, 0.5), 0.7), 0.255413, places=6)
        model = SourceModel(3, 0.6)
        self.assertEqual(rate_centralized(model, 0.4), shannon_lower_bound(model, 0.4))
        for ell in (2, 5, 9):
            self.assertAlmostEqual(rate_centralized(SourceModel(ell, 0.0), 0.3), 0.5 * ell * math.log(1 / 0.3), places=12)

    def test_waterfill_examples(self):
        solution = waterfill(SourceModel(3, 0.6), 0.5)
        self.assertAlmostEqual(solution.per_mode.bulk, 0.4, places=14)
        self.assertAlmostEqual(solution.per_mode.apex, 0.7, places=14)

        flat = waterfill(SourceModel(2, 0.0), 0.25)
        self.assertAlmostEqual(flat.per_mode.bulk, 0.25)
        self.assertAlmostEqual(flat.water_level, 0.25)

        negative = waterfill(SourceModel(3, -0.3), 0.5)
        self.assertAlmostEqual(negative.per_mode.bulk, 0.55, places=14)
        self.assertAlmostEqual(negative.per_mode.apex, 0.4, places=14)

    def test_reverse_waterfill_generic_spectrum(self):
        allocation, level = reverse_waterfill(np.array([0.1, 2.0, 0.5, 1.4]), 1.6)
        np.testing.assert_allclose(allocation, [0.1, 0.5, 0.5, 0.5])
        self.assertAlmostEqual(level, 0.5)
        self.assertAlmostEqual(allocation.sum(), 1.6)

    def test_distortion_matrix_examples(self):
        self.assertEqual(distortion_matrix_centralized(SourceModel(3, 0.6), 0.3), ExchangeableMatrix(3, 0.3, 0.0))
        self.assertAlmostEqual(distortion_matrix_centralized(SourceModel(3, 0.6), 0.5).off, 0.1, places=14)
        self.assertAlmostEqual(distortion_matrix_centralized(SourceModel(3, -0.3), 0.5).off, -0.05, places=14)

    def test_waterfill_matches_closed_form_on_grid(self):
        for ell in (2, 3, 5, 12):
            for model in valid_models(ell):
                for d in D_GRID:
                    solution = waterfill(model, d)
                    self.assertAlmostEqual(solution.rate_nats, rate_centralized(model, d), places=10)
                    matrix_spectrum = spectrum(distortion_matrix_centralized(model, d))
                    self.assertAlmostEqual(solution.per_mode.bulk, matrix_spectrum.bulk, places=12)
                    self.assertAlmostEqual(solution.per_mode.apex, matrix_spectrum.apex, places=12)

    def test_waterfill_on_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            ell = int(rng.integers(2, 13))
            rho = float(rng.uniform(-1.0 / (ell - 1) + 1e-6, 1.0 - 1e-6))
            d = float(rng.uniform(1e-6, 1.0 - 1e-6))
            model = SourceModel(ell, rho)
            solution = waterfill(model, d)
            source = spectrum(source_covariance(model))
            label = f"ell={ell} rho={rho!r} d={d!r}"
            self.assertAlmostEqual(solution.per_mode.mean(), d, delta=1e-12, msg=label)
            self.assertGreater(solution.per_mode.bulk, 0.0, msg=label)
            self.assertGreater(solution.per_mode.apex, 0.0, msg=label)
            self.assertLessEqual(solution.per_mode.bulk, source.bulk * (1 + 1e-12), msg=label)
            self.assertLessEqual(solution.per_mode.apex, source.apex * (1 + 1e-12), msg=label)
            exact = rate_centralized(model, d)
            self.assertAlmostEqual(solution.rate_nats, exact, delta=1e-9 * max(1.0, exact), msg=label)

    def test_distortion_matrix_is_feasible(self):
        for ell in (2, 4, 7):
            for model in valid_models(ell):
                source = spectrum(source_covariance(model))
                for d in D_GRID:
                    matrix = distortion_matrix_centralized(model, d)
                    eig = spectrum(matrix)
                    self.assertAlmostEqual(eig.mean(), d, places=12)
                    self.assertLessEqual(eig.bulk, source.bulk + 1e-12)
                    self.assertLessEqual(eig.apex, source.apex + 1e-12)

    def test_rate_dominates_lower_bound_and_decreases(self):
        for model in valid_models(4):
            rates = [rate_centralized(model, d) for d in D_GRID]
            for d, rate in zip(D_GRID, rates):
                slb = shannon_lower_bound(model, d)
                self.assertGreaterEqual(rate, slb - 1e-12)
                if d <= model.critical:
                    self.assertEqual(rate, slb)
            self.assertTrue(all(b < a for a, b in zip(rates, rates[1:])))
            self.assertLess(rate_centralized(model, 1 - 1e-9), 1e-6)

    def test_rate_is_continuous_at_critical_distortion(self):
        for model in valid_models(5):
            if model.critical >= 1:
                continue
            below = rate_centralized(model, model.critical * (1 - 1e-10))
            above = rate_centralized(model, model.critical * (1 + 1e-10))
            self.assertAlmostEqual(below, above, places=7)

    def test_rate_from_spectra_zero_for_uncoded_modes(self):
        source = spectrum(source_covariance(SourceModel(3, 0.6)))
        self.assertEqual(rate_from_spectra(source, source), 0.0)

    def test_invalid_distortion_rejected(self):
        model = SourceModel(3, 0.6)
        for d in (0.0, 1.0, -0.2, 1.5):
            with self.assertRaises(ParameterRangeError):
                rate_centralized(model, d)


class DistributedRateTest(SimpleTestCase):

    def test_two_source_example(self):
        solution = rate_distributed(SourceModel(2, 0.5), 0.5)
        self.assertAlmostEqual(solution.xi, -0.25, places=14)
        self.assertAlmostEqual(solution.gamma, 1.151388, places=6)
        self.assertAlmostEqual(solution.theta, 0.151388, places=6)
        self.assertAlmostEqual(solution.rate_nats, 0.597397, delta=1e-4)

    def test_independent_sources(self):
        solution = rate_distributed(SourceModel(3, 0.0), 0.4)
        self.assertEqual(solution.theta, 0.0)
        self.assertAlmostEqual(solution.rate_nats, 1.5 * math.log(1 / 0.4), places=14)

    def test_rate_vanishes_near_one(self):
        self.assertLess(rate_distributed(SourceModel(3, 0.6), 1 - 1e-9).rate_nats, 1e-6)

    def test_strictly_above_centralized(self):
        for ell in (2, 3, 6):
            for model in valid_models(ell):
                for d in D_GRID:
                    self.assertGreater(rate_distributed(model, d).rate_nats, rate_centralized(model, d))

    def test_distortion_spectrum_below_source(self):
        for model in valid_models(4):
            source = spectrum(source_covariance(model))
            for d in D_GRID:
                eig = rate_distributed(model, d).distortion_spectrum
                self.assertGreater(eig.bulk, 0)
                self.assertGreater(eig.apex, 0)
                self.assertLessEqual(eig.bulk, source.bulk + 1e-12)
                self.assertLessEqual(eig.apex, source.apex + 1e-12)

    def test_gamma_matches_plus_channel(self):
        for ell in (2, 3, 5):
            for model in valid_models(ell, [r for r in RHO_GRID if r > 0]):
                for d in D_GRID:
                    solution = rate_distributed(model, d)
                    d_check, theta = d_plus_theta_plus(model, 1, solution.gamma)
                    self.assertAlmostEqual(d_check, d, places=10)
                    self.assertAlmostEqual(theta, solution.theta, places=10)


class GeneralizedBoundTest(SimpleTestCase):

    def test_binomial_boundary_convention(self):
        self.assertEqual(binomial(0, 1), 0)
        self.assertEqual(binomial(2, -1), 0)
        self.assertEqual(binomial(6, 3), 20)

    def test_critical_distortion_values(self):
        self.assertAlmostEqual(critical_distortion(SourceModel(3, 0.6), 2), 11 / 35, places=12)
        self.assertAlmostEqual(critical_distortion(SourceModel(4, 0.3), 2), 0.532, places=12)
        self.assertAlmostEqual(critical_distortion(SourceModel(4, 0.3), 3), 133 / 205, places=12)
        self.assertAlmostEqual(critical_distortion(SourceModel(3, 0.5), 2), 0.4, places=12)
        self.assertEqual(critical_distortion(SourceModel(5, 0.4), 1), 0.0)
        self.assertAlmostEqual(critical_distortion(SourceModel(5, 0.4), 5), 0.6, places=12)
        with self.assertRaises(ParameterRangeError):
            critical_distortion(SourceModel(3, -0.2), 2)

    def test_critical_distortion_monotonicity(self):
        for rho in (0.1, 0.5, 0.9):
            for ell in range(3, 9):
                values = [critical_distortion(SourceModel(ell, rho), m) for m in range(1, ell + 1)]
                self.assertTrue(all(b > a for a, b in zip(values, values[1:])))
            for m in (2, 3):
                by_ell = [critical_distortion(SourceModel(ell, rho), m) for ell in range(m + 1, 12)]
                self.assertTrue(all(b < a for a, b in zip(by_ell, by_ell[1:])))

    def test_critical_distortions_pm(self):
        minus, plus = critical_distortions_pm(SourceModel(3, 0.6))
        self.assertAlmostEqual(minus, 2.2)
        self.assertAlmostEqual(plus, 0.4)
        self.assertEqual(critical_distortions_pm(SourceModel(5, 0.0)), (1.0, 1.0))

    def test_eta_coefficients(self):
        eta = eta_coefficients(SourceModel(3, 0.5), 2)
        self.assertEqual((eta.eta1, eta.eta2, eta.eta3, eta.eta4), (4.0, 8.5, 5.5, 5.25))
        self.assertAlmostEqual(eta.eta1_scaled, 1.0)
        self.assertAlmostEqual(eta.eta2_scaled, 4.25)
        self.assertEqual(eta_coefficients(SourceModel(2, 0.5), 2).eta1, 0.0)
        self.assertFalse(eta.overflow)

    def test_eta_coefficients_overflow_is_flagged(self):
        eta = eta_coefficients(SourceModel(3000, 0.5), 1500)
        self.assertTrue(eta.overflow)
        self.assertTrue(math.isinf(eta.scale))
        for value in (eta.eta1_scaled, eta.eta2_scaled, eta.eta3_scaled, eta.eta4_scaled):
            self.assertTrue(math.isfinite(value))

    def test_d_plus_theta_plus_examples(self):
        model = SourceModel(3, 0.5)
        self.assertAlmostEqual(critical_gamma_plus(model, 2), 2.0, places=14)
        d, theta = d_plus_theta_plus(model, 2, 2.0)
        self.assertAlmostEqual(d, 0.4, places=14)
        self.assertAlmostEqual(theta, 0.0, places=14)
        d, _ = d_plus_theta_plus(model, 2, 1.0)
        self.assertAlmostEqual(d, 0.2962963, places=7)
        d, theta = d_plus_theta_plus(model, 2, 1e9)
        self.assertAlmostEqual(d, 1.0, places=6)
        self.assertAlmostEqual(theta, 0.5, places=6)
        for gamma in (0.0, -1.0):
            with self.assertRaises(ParameterRangeError):
                d_plus_theta_plus(model, 2, gamma)

    def test_d_minus_theta_minus_examples(self):
        model = SourceModel(3, -0.3)
        d, theta = d_minus_theta_minus(model, 2, 1.0)
        self.assertAlmostEqual(d, 1 - 3.38 / 4.9, places=12)
        self.assertAlmostEqual(theta, 0.044898, places=6)
        gamma_c = critical_gamma_minus(model, 2)
        self.assertAlmostEqual(gamma_c, 1.3 * 0.4 / 0.3, places=12)
        d, theta = d_minus_theta_minus(model, 2, gamma_c)
        self.assertAlmostEqual(theta, 0.0, places=12)
        self.assertAlmostEqual(d, model.critical_minus, places=12)
        d, theta = d_minus_theta_minus(model, 2, 1e12)
        self.assertAlmostEqual(d, 1.0, places=9)
        self.assertAlmostEqual(theta, -0.3, places=9)
        with self.assertRaises(ParameterRangeError):
            d_minus_theta_minus(model, 1, 1.0)

    def test_gamma_of_d_examples(self):
        negative = gamma_of_d(SourceModel(3, -0.3), 2, 0.5)
        self.assertEqual(negative.branch, GammaBranch.NEGATIVE_RHO)
        self.assertAlmostEqual(negative.gamma, 2.86, places=12)
        self.assertAlmostEqual(negative.d_check, 0.5, places=12)

        positive = gamma_of_d(SourceModel(3, 0.5), 2, 0.4)
        self.assertEqual(positive.branch, GammaBranch.POSITIVE_RHO)
        self.assertAlmostEqual(positive.gamma, 2.0, places=12)
        self.assertAlmostEqual(positive.theta, 0.0, places=12)

        distributed = gamma_of_d(SourceModel(2, 0.5), 1, 0.5)
        self.assertAlmostEqual(distributed.gamma, 1.151388, places=6)

    def test_gamma_of_d_rejects(self):
        with self.assertRaises(ParameterRangeError):
            gamma_of_d(SourceModel(3, 0.0), 2, 0.5)
        with self.assertRaises(ParameterRangeError):
            gamma_of_d(SourceModel(3, -0.3), 2, 0.1)
        with self.assertRaises(ParameterRangeError):
            gamma_of_d(SourceModel(3, -0.3), 1, 0.5)

    def test_gamma_of_d_with_m_equal_ell(self):
        model = SourceModel(4, 0.5)
        for d in (0.1, 0.3, 0.375):
            with self.assertRaises(ParameterRangeError):
                gamma_of_d(model, 4, d)
        solution = gamma_of_d(model, 4, 0.45)
        self.assertAlmostEqual(solution.d_check, 0.45, places=10)
        self.assertAlmostEqual(solution.theta, 0.45 - 1 + 0.5, places=10)
        self.assertAlmostEqual(solution.gamma_scaled, 0.75 / 0.55, places=10)

    def test_gamma_round_trip_on_grid(self):
        for ell in (2, 3, 5, 8):
            for model in valid_models(ell):
                for m in range(1, ell + 1):
                    for d in D_GRID:
                        if model.rho < 0 and (m < 2 or d <= model.critical_minus / ell):
                            continue
                        if model.rho > 0 and m == ell and d <= model.critical_plus:
                            continue
                        solution = gamma_of_d(model, m, d)
                        self.assertAlmostEqual(solution.d_check, d, places=10)

    def test_critical_gamma_reaches_critical_distortion(self):
        for ell in range(3, 9):
            for rho in (0.1, 0.4, 0.8):
                model = SourceModel(ell, rho)
                for m in range(2, ell + 1):
                    d, theta = d_plus_theta_plus(model, m, critical_gamma_plus(model, m))
                    self.assertAlmostEqual(theta, 0.0, places=10)
                    self.assertAlmostEqual(d, critical_distortion(model, m), places=10)

    def test_upper_bound_examples(self):
        model = SourceModel(3, 0.6)
        below = upper_bound_rate(model, 2, 0.3)
        self.assertTrue(below.exact)
        self.assertEqual(below.justification, Justification.BELOW_CRITICAL)
        self.assertAlmostEqual(below.rate_nats, rate_centralized(model, 0.3), places=12)
        self.assertAlmostEqual(below.rate_nats, shannon_lower_bound(model, 0.3), places=12)

        model = SourceModel(4, 0.3)
        self.assertEqual(upper_bound_rate(model, 3, 0.6).theta, 0.0)
        self.assertEqual(bound_spectrum(model, 3, 0.6).distortion, waterfill(model, 0.6).per_mode)

        model = SourceModel(3, -0.3)
        negative = upper_bound_rate(model, 2, 0.5)
        self.assertTrue(negative.exact)
        self.assertEqual(negative.justification, Justification.NON_POSITIVE_CORRELATION)
        self.assertAlmostEqual(negative.rate_nats, rate_centralized(model, 0.5), places=14)

    def test_upper_bound_matches_extremes(self):
        for ell in (2, 3, 6):
            for model in valid_models(ell, [r for r in RHO_GRID if r > 0]):
                for d in D_GRID:
                    self.assertAlmostEqual(upper_bound_rate(model, 1, d).rate_nats,
                                           rate_distributed(model, d).rate_nats, places=12)
                    self.assertAlmostEqual(upper_bound_rate(model, ell, d).rate_nats,
                                           rate_centralized(model, d), places=12)

    def test_plus_quadratic_reaches_centralized_at_full_subsets(self):
        for ell in (2, 4, 7):
            for rho in (0.2, 0.6):
                model = SourceModel(ell, rho)
                for d in (model.critical_plus + 0.05, 0.8, 0.95):
                    solution = gamma_of_d(model, ell, d)
                    self.assertAlmostEqual(solution.theta, d - 1 + rho, places=10)

    def test_sandwich_and_monotone_in_m(self):
        for ell in (3, 4, 5):
            for model in valid_models(ell):
                for d in D_GRID:
                    rates = [upper_bound_rate(model, m, d).rate_nats for m in range(1, ell + 1)]
                    lower = rate_centralized(model, d)
                    upper = rate_distributed(model, d).rate_nats
                    for rate in rates:
                        self.assertGreaterEqual(rate, lower - 1e-10)
                        self.assertLessEqual(rate, upper + 1e-10)
                    for a, b in zip(rates, rates[1:]):
                        self.assertGreaterEqual(a, b - 1e-10)

    def test_independent_sources_everywhere(self):
        model = SourceModel(4, 0.0)
        for m in range(1, 5):
            result = upper_bound_rate(model, m, 0.3)
            self.assertEqual(result.justification, Justification.INDEPENDENT)
            self.assertAlmostEqual(result.rate_nats, 2 * math.log(1 / 0.3), places=14)

    def test_large_ell_stays_finite(self):
        model = SourceModel(3000, 0.5)
        result = upper_bound_rate(model, 1500, 0.6)
        self.assertTrue(math.isfinite(result.rate_nats))
        self.assertFalse(result.exact)
        self.assertGreater(result.rate_nats, rate_centralized(model, 0.6))

    def test_rate_exact(self):
        unknown = rate_exact(SourceModel(3, 0.6), 2, 0.5)
        self.assertFalse(unknown.known)
        self.assertIsNone(unknown.rate_nats)
        self.assertEqual(unknown.justification, Justification.UPPER_BOUND)
        self.assertAlmostEqual(unknown.lower_nats, rate_centralized(SourceModel(3, 0.6), 0.5))
        self.assertGreater(unknown.upper_nats, unknown.lower_nats)

        known = rate_exact(SourceModel(5, -0.1), 3, 0.7)
        self.assertTrue(known.known)
        self.assertAlmostEqual(known.rate_nats, rate_centralized(SourceModel(5, -0.1), 0.7), places=14)

        full = rate_exact(SourceModel(4, 0.3), 4, 0.8)
        self.assertEqual(full.justification, Justification.CENTRALIZED)
        self.assertAlmostEqual(full.rate_nats, 0.5 * math.log((1 + 3 * 0.3) / (4 * 0.8 - 3 * 0.7)), places=12)

    def test_bound_spectrum_flags_uncoded_modes(self):
        result = bound_spectrum(SourceModel(3, 0.6), 3, 0.5)
        self.assertEqual(result.uncoded, (True, False))
        self.assertAlmostEqual(result.distortion.bulk, 0.4, places=12)
        flat = bound_spectrum(SourceModel(3, 0.0), 2, 0.5)
        self.assertEqual((flat.distortion.bulk, flat.distortion.apex), (0.5, 0.5))
