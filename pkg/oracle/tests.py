import numpy as np
from django.test import SimpleTestCase, override_settings

from core.exceptions import OracleCapExceeded, ParameterRangeError, VerificationFailure
from core.models import SourceModel, source_covariance
from rates.bounds import critical_gamma_plus, d_minus_theta_minus, d_plus_theta_plus, gamma_of_d, upper_bound_rate
from rates.centralized import rate_centralized, shannon_lower_bound

from .schemes import AuxScheme, Branch, encoder_subsets, omega_partition, validate_partition
from .services import ConditioningOracle, JointCovariance, exchangeable_fit, refinement_noise
from .verification import SUITE_ALIASES, SUITES, VerificationRunner


class SchemeTest(SimpleTestCase):

    def test_encoder_subsets_order(self):
        self.assertEqual(encoder_subsets(3, 2), [(0, 1), (0, 2), (1, 2)])
        self.assertEqual(len(encoder_subsets(8, 4)), 70)

    def test_omega_partition_examples(self):
        self.assertEqual(omega_partition(3, 2), {(0, 1): (0, 1), (0, 2): (), (1, 2): (2,)})
        self.assertEqual(omega_partition(4, 1), {(i,): (i,) for i in range(4)})
        self.assertEqual(omega_partition(5, 5), {(0, 1, 2, 3, 4): (0, 1, 2, 3, 4)})

    def test_omega_partition_is_always_valid(self):
        for ell in range(2, 9):
            for m in range(1, ell + 1):
                validate_partition(ell, m, omega_partition(ell, m))

    def test_invalid_partitions(self):
        with self.assertRaises(ParameterRangeError):
            validate_partition(3, 2, {(0, 1): (0, 1), (1, 2): (1, 2)})
        with self.assertRaises(ParameterRangeError):
            validate_partition(3, 2, {(0, 1): (0, 2), (1, 2): (1,)})
        with self.assertRaises(ParameterRangeError):
            validate_partition(3, 2, {(0, 1): (0, 1)})
        with self.assertRaises(ParameterRangeError):
            validate_partition(3, 2, {(0, 1, 2): (0, 1, 2)})

    def test_scheme_validation(self):
        with self.assertRaises(ParameterRangeError):
            AuxScheme(Branch.MINUS, 1.0, 1)
        with self.assertRaises(ParameterRangeError):
            AuxScheme(Branch.PLUS, -1.0, 2)
        with self.assertRaises(ParameterRangeError):
            AuxScheme(Branch.PLUS, 1.0, 2, augment=0.2)
        scheme = AuxScheme('plus', 2.0, 2, augment=0.2, omega=omega_partition(3, 2))
        self.assertIs(scheme.branch, Branch.PLUS)
        self.assertIsNone(scheme.without_augment().augment)


class ConditioningOracleTest(SimpleTestCase):

    def setUp(self):
        self.oracle = ConditioningOracle()

    def test_joint_entries_plus_singletons(self):
        model = SourceModel(2, 0.5)
        joint = self.oracle.build_joint(model, AuxScheme(Branch.PLUS, 1.0, 1))
        self.assertEqual(joint.matrix.shape, (4, 4))
        self.assertEqual(joint.labels, ('X0', 'X1', 'U+(0,)', 'U+(1,)'))
        np.testing.assert_allclose(joint.sxx, source_covariance(model).to_dense())
        np.testing.assert_allclose(joint.svv, [[2.0, 0.5], [0.5, 2.0]])
        np.testing.assert_allclose(joint.matrix, joint.matrix.T)

    def test_joint_entries_minus(self):
        joint = self.oracle.build_joint(SourceModel(3, -0.3), AuxScheme(Branch.MINUS, 1.0, 2))
        self.assertEqual(joint.matrix.shape, (9, 9))
        np.testing.assert_allclose(np.diag(joint.svv), np.full(6, 2 + 0.6 + 1.0))
        self.assertGreaterEqual(np.linalg.eigvalsh(joint.matrix).min(), -1e-12)

    def test_minus_conditional_covariance(self):
        model = SourceModel(3, -0.3)
        dense = self.oracle.conditional_covariance(self.oracle.build_joint(model, AuxScheme(Branch.MINUS, 1.0, 2)))
        fitted, deviation = exchangeable_fit(dense)
        self.assertLess(deviation, 1e-9)
        self.assertAlmostEqual(fitted.diag, 0.310204, places=6)
        self.assertAlmostEqual(fitted.off, 0.044898, places=6)

    def test_closed_forms_on_small_grid(self):
        for ell in (2, 3, 4):
            for rho in (-0.3, 0.2, 0.7):
                if rho <= -1.0 / (ell - 1):
                    continue
                model = SourceModel(ell, rho)
                for m in range(1, ell + 1):
                    for gamma in (0.1, 1.0, 10.0):
                        if m >= 2:
                            dense = self.oracle.conditional_covariance(
                                self.oracle.build_joint(model, AuxScheme(Branch.MINUS, gamma, m)))
                            d, theta = d_minus_theta_minus(model, m, gamma)
                            fitted, deviation = exchangeable_fit(dense)
                            self.assertLess(deviation, 1e-9)
                            self.assertAlmostEqual(fitted.diag, d, places=9)
                            self.assertAlmostEqual(fitted.off, theta, places=9)
                        if rho > 0:
                            dense = self.oracle.conditional_covariance(
                                self.oracle.build_joint(model, AuxScheme(Branch.PLUS, gamma, m)))
                            d, theta = d_plus_theta_plus(model, m, gamma)
                            fitted, deviation = exchangeable_fit(dense)
                            self.assertLess(deviation, 1e-9)
                            self.assertAlmostEqual(fitted.diag, d, places=9)
                            self.assertAlmostEqual(fitted.off, theta, places=9)

    def test_no_auxiliaries(self):
        model = SourceModel(3, 0.4)
        sigma = source_covariance(model).to_dense()
        joint = JointCovariance(matrix=sigma, ell=3, rows=())
        np.testing.assert_allclose(self.oracle.conditional_covariance(joint), sigma)
        self.assertAlmostEqual(self.oracle.berger_tung_rate(model, joint), 0.0, places=12)

    def test_berger_tung_matches_closed_forms(self):
        model = SourceModel(3, -0.3)
        rate = self.oracle.rate_for(model, AuxScheme(Branch.MINUS, 2.86, 2))
        self.assertAlmostEqual(rate, rate_centralized(model, 0.5), places=9)

        model = SourceModel(3, 0.5)
        rate = self.oracle.rate_for(model, AuxScheme(Branch.PLUS, 2.0, 2))
        self.assertAlmostEqual(rate, shannon_lower_bound(model, 0.4), places=9)

    def test_berger_tung_matches_upper_bound(self):
        for ell, rho, m, d in ((4, 0.3, 2, 0.7), (4, 0.3, 3, 0.8), (3, 0.6, 2, 0.5), (5, 0.2, 1, 0.4)):
            model = SourceModel(ell, rho)
            gamma = gamma_of_d(model, m, d).gamma
            rate = self.oracle.rate_for(model, AuxScheme(Branch.PLUS, gamma, m))
            self.assertAlmostEqual(rate, upper_bound_rate(model, m, d).rate_nats, places=9)

    def test_refined_plus_scheme_reaches_diagonal(self):
        model = SourceModel(3, 0.5)
        scheme = AuxScheme(Branch.PLUS, critical_gamma_plus(model, 2), 2, augment=0.2, omega=omega_partition(3, 2))
        self.assertAlmostEqual(refinement_noise(model, scheme), 0.4)
        joint = self.oracle.build_joint(model, scheme)
        self.assertIn('W2', joint.labels)
        dense = self.oracle.conditional_covariance(joint)
        np.testing.assert_allclose(dense, 0.2 * np.eye(3), atol=1e-9)
        self.assertLess(self.oracle.precision_additivity_residual(model, scheme), 1e-8)
        self.assertAlmostEqual(self.oracle.berger_tung_rate(model, joint), shannon_lower_bound(model, 0.2), places=9)

    def test_refinement_target_must_be_below_critical(self):
        model = SourceModel(3, 0.5)
        scheme = AuxScheme(Branch.PLUS, 2.0, 2, augment=0.6, omega=omega_partition(3, 2))
        with self.assertRaises(ParameterRangeError):
            self.oracle.build_joint(model, scheme)

    def test_mmse_weights(self):
        weights = self.oracle.mmse_weights(SourceModel(3, -0.3), AuxScheme(Branch.MINUS, 1.0, 2))
        self.assertAlmostEqual(weights.kappa, 1.3 / 4.9, places=14)
        weights = self.oracle.mmse_weights(SourceModel(3, -0.3), AuxScheme(Branch.MINUS, 1e12, 2))
        self.assertLess(weights.kappa, 1e-11)
        weights = self.oracle.mmse_weights(SourceModel(3, 0.5), AuxScheme(Branch.PLUS, 2.0, 2))
        self.assertAlmostEqual(weights.alpha, 0.2, places=14)
        self.assertAlmostEqual(weights.beta, 0.0, places=14)

    def test_mmse_orthogonality_and_error(self):
        cases = (
            (SourceModel(3, -0.3), AuxScheme(Branch.MINUS, 1.0, 2)),
            (SourceModel(4, 0.3), AuxScheme(Branch.MINUS, 0.5, 3)),
            (SourceModel(3, 0.5), AuxScheme(Branch.PLUS, 2.0, 2)),
            (SourceModel(4, 0.7), AuxScheme(Branch.PLUS, 0.3, 1)),
        )
        for model, scheme in cases:
            self.assertLess(self.oracle.orthogonality_residual(model, scheme), 1e-10)
            dense = self.oracle.conditional_covariance(self.oracle.build_joint(model, scheme))
            np.testing.assert_allclose(self.oracle.estimator_error_covariance(model, scheme), dense, atol=1e-9)

    def test_mmse_rejects_refined_scheme(self):
        scheme = AuxScheme(Branch.PLUS, 2.0, 2, augment=0.2, omega=omega_partition(3, 2))
        with self.assertRaises(ParameterRangeError):
            self.oracle.mmse_weights(SourceModel(3, 0.5), scheme)

    def test_cap(self):
        with self.assertRaises(OracleCapExceeded):
            ConditioningOracle(max_ell=4).build_joint(SourceModel(5, 0.3), AuxScheme(Branch.PLUS, 1.0, 2))
        with self.assertRaises(OracleCapExceeded):
            self.oracle.build_joint(SourceModel(9, 0.3), AuxScheme(Branch.PLUS, 1.0, 2))

    @override_settings(GAUSSMT_ORACLE_MAX_ELL=3)
    def test_cap_follows_settings(self):
        self.assertEqual(ConditioningOracle().max_ell, 3)


class VerificationRunnerTest(SimpleTestCase):

    def test_all_suites_pass_on_small_networks(self):
        runner = VerificationRunner(max_ell=3)
        reports = runner.run()
        self.assertEqual([report.suite for report in reports], list(SUITES))
        for report in reports:
            self.assertTrue(report.cases)
            self.assertTrue(report.passed, msg=f"{report.suite}: {report.worst}")
        runner.raise_for_failures(reports)

    def test_threaded_run_matches_serial(self):
        serial = VerificationRunner(max_ell=3, n_jobs=1).run(['plus'])
        threaded = VerificationRunner(max_ell=3, n_jobs=2).run(['plus'])
        self.assertEqual([c.label for c in serial[0].cases], [c.label for c in threaded[0].cases])
        self.assertEqual(serial[0].passed, threaded[0].passed)

    def test_failure_is_reported(self):
        runner = VerificationRunner(max_ell=3, tolerance=1e-30)
        reports = runner.run(['minus'])
        self.assertFalse(reports[0].passed)
        with self.assertRaises(VerificationFailure) as ctx:
            runner.raise_for_failures(reports)
        self.assertEqual(ctx.exception.suite, 'minus')

    def test_short_suite_names(self):
        reports = VerificationRunner(max_ell=3).run(['m1', 'thm1'])
        self.assertEqual([report.suite for report in reports], ['minus-construction', 'distributed'])
        self.assertTrue(all(report.passed for report in reports))
        self.assertTrue(set(SUITE_ALIASES.values()) <= set(SUITES))

    def test_minus_construction_covers_moderate_negative_correlation(self):
        report = VerificationRunner(max_ell=3).run(['minus-construction'])[0]
        self.assertTrue(any('rho=-0.2 ' in case.label for case in report.cases))

    def test_rejects_bad_arguments(self):
        with self.assertRaises(OracleCapExceeded):
            VerificationRunner(max_ell=20)
        with self.assertRaises(ParameterRangeError):
            VerificationRunner(max_ell=1)
        with self.assertRaises(ParameterRangeError):
            VerificationRunner(max_ell=3).run(['bogus'])
