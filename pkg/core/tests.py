import json
import math
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np
from django.test import SimpleTestCase

from .curves import (
    CRITICAL_COLUMNS,
    GAP_COLUMNS,
    DEFAULTS,
    CurveRequest,
    OutputFormat,
    Quantity,
    build_request,
    build_rows,
    format_value,
    load_config,
    load_schema,
    merge_options,
    render,
    render_csv,
    request_summary,
    sample_grid,
    write_atomic,
)
from .exceptions import NumericalError, ParameterRangeError
from .models import (
    ExchangeableMatrix,
    SourceModel,
    log_det,
    source_covariance,
    spectrum,
    validate_distortion,
    validate_subset_size,
)
from .parallel import ordered_map


class SourceModelTest(SimpleTestCase):

    def test_admissible_range(self):
        SourceModel(3, -0.49)
        SourceModel(2, 0.0)
        for ell, rho in ((1, 0.5), (3, -0.5), (3, 1.0), (4, -0.4), (2.5, 0.1)):
            with self.assertRaises(ParameterRangeError):
                SourceModel(ell, rho)

    def test_critical_distortions(self):
        model = SourceModel(3, 0.6)
        self.assertAlmostEqual(model.critical_minus, 2.2)
        self.assertAlmostEqual(model.critical_plus, 0.4)
        self.assertEqual(model.critical, model.critical_plus)
        self.assertAlmostEqual(SourceModel(3, -0.3).critical, 0.4)

    def test_spectrum(self):
        eig = spectrum(ExchangeableMatrix(3, 0.5, 0.044898))
        self.assertAlmostEqual(eig.bulk, 0.455102, places=12)
        self.assertAlmostEqual(eig.apex, 0.589796, places=12)
        source = spectrum(source_covariance(SourceModel(4, -0.3)))
        self.assertAlmostEqual(source.bulk, 1.3, places=14)
        self.assertAlmostEqual(source.apex, 0.1, places=14)
        self.assertAlmostEqual(source.trace(), 4.0, places=14)

    def test_spectrum_matches_dense_eigenvalues(self):
        for ell, diag, off in ((2, 1.0, 0.5), (5, 0.7, -0.1), (8, 2.0, 0.3)):
            mat = ExchangeableMatrix(ell, diag, off)
            np.testing.assert_allclose(np.sort(spectrum(mat).values()), np.linalg.eigvalsh(mat.to_dense()), atol=1e-12)

    def test_log_det(self):
        self.assertAlmostEqual(log_det(source_covariance(SourceModel(2, 0.5))), math.log(0.75), places=14)
        self.assertAlmostEqual(log_det(source_covariance(SourceModel(3, 0.6))), math.log(0.352), places=14)
        with self.assertRaises(NumericalError):
            log_det(ExchangeableMatrix(2, 0.5, 0.7))

    def random_matrices(self, rng, count):
        for _ in range(count):
            ell = int(rng.integers(2, 13))
            diag = float(rng.uniform(0.1, 3.0))
            off = float(rng.uniform(-0.95 * diag / (ell - 1), 0.95 * diag))
            yield ExchangeableMatrix(ell, diag, off)

    def test_spectrum_and_log_det_match_dense_solvers_on_random_matrices(self):
        rng = np.random.default_rng(20240611)
        for mat in self.random_matrices(rng, 500):
            dense = mat.to_dense()
            np.testing.assert_allclose(np.sort(spectrum(mat).values()), np.linalg.eigvalsh(dense),
                                       rtol=0, atol=1e-10, err_msg=str(mat))
            cholesky = np.linalg.cholesky(dense)
            self.assertAlmostEqual(log_det(mat), 2.0 * np.log(np.diag(cholesky)).sum(), delta=1e-10, msg=str(mat))

    def test_spectrum_is_permutation_invariant(self):
        rng = np.random.default_rng(7)
        for mat in self.random_matrices(rng, 200):
            dense = mat.to_dense()
            perm = rng.permutation(mat.ell)
            permuted = dense[np.ix_(perm, perm)]
            np.testing.assert_array_equal(permuted, dense)
            np.testing.assert_allclose(np.linalg.eigvalsh(permuted), np.sort(spectrum(mat).values()),
                                       rtol=0, atol=1e-10, err_msg=str(mat))

    def test_validators(self):
        self.assertEqual(validate_distortion(0.5), 0.5)
        for d in (0.0, 1.0, float('nan')):
            with self.assertRaises(ParameterRangeError):
                validate_distortion(d)
        model = SourceModel(4, 0.3)
        self.assertEqual(validate_subset_size(model, 4), 4)
        for m in (0, 5, 1.5):
            with self.assertRaises(ParameterRangeError):
                validate_subset_size(model, m)


class OrderedMapTest(SimpleTestCase):

    def test_order_is_preserved(self):
        items = list(range(20))
        self.assertEqual(ordered_map(lambda x: x * x, items, n_jobs=1), [x * x for x in items])
        self.assertEqual(ordered_map(lambda x: x * x, items, n_jobs=4), [x * x for x in items])
        self.assertEqual(ordered_map(lambda x: x, []), [])


class CurveRequestTest(SimpleTestCase):

    def test_defaults_cover_every_m(self):
        request = CurveRequest(Quantity.RATE, ell=4, rho=0.3)
        self.assertEqual(request.m_values, (1, 2, 3, 4))
        self.assertIs(request.fmt, OutputFormat.CSV)
        self.assertIn('ell=4', request_summary(request))

    def test_rejects_bad_requests(self):
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_min=0.0)
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_min=0.5, d_max=0.4)
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_count=1)
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.RATE, ell=3, rho=0.6, m_values=(4,))
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.SPECTRUM, ell=3, rho=0.6)
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.GAP, ell=3, rho=-0.3)
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.RATE, ell=3, rho=-0.6)

    def test_gap_request_allows_m_above_ell(self):
        request = build_request(Quantity.GAP, merge_options({'rho': 0.3, 'm': [1, 2, 3, 4]}, {}))
        self.assertEqual(request.m_values, (1, 2, 3, 4))
        self.assertNotIn('ell', request.describe())
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.GAP, ell=3, rho=0.3, m_values=(0,))
        with self.assertRaises(ParameterRangeError):
            CurveRequest(Quantity.BOUND, ell=3, rho=0.3, m_values=(4,))

    def test_sample_grid(self):
        linear = sample_grid(CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_min=0.1, d_max=0.9, d_count=5))
        np.testing.assert_allclose(linear, [0.1, 0.3, 0.5, 0.7, 0.9])
        geometric = sample_grid(CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_min=0.01, d_max=0.81, d_count=3, d_log=True))
        np.testing.assert_allclose(geometric, [0.01, 0.09, 0.81])


class ConfigTest(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, text):
        path = Path(self.tmp.name) / 'curve.env'
        path.write_text(text, encoding='utf-8')
        return path

    def test_load_config(self):
        path = self.write_config("ELL=4\nRHO=0.3\nM=2,3\nD_LOG=true\nFORMAT=json\nd-count=7\n")
        config = load_config(path)
        self.assertEqual(config, {'ell': 4, 'rho': 0.3, 'm': [2, 3], 'd_log': True, 'format': 'json', 'd_count': 7})

    def test_load_config_errors(self):
        with self.assertRaises(ParameterRangeError):
            load_config(Path(self.tmp.name) / 'missing.env')
        with self.assertRaises(ParameterRangeError):
            load_config(self.write_config("COLOR=blue\n"))
        with self.assertRaises(ParameterRangeError):
            load_config(self.write_config("ELL=three\n"))
        with self.assertRaises(ParameterRangeError):
            load_config(self.write_config("FORMAT=xml\n"))

    def test_precedence(self):
        merged = merge_options({'ell': 5, 'rho': None}, {'ell': 4, 'rho': 0.3, 'd_count': 7})
        self.assertEqual(merged['ell'], 5)
        self.assertEqual(merged['rho'], 0.3)
        self.assertEqual(merged['d_count'], 7)
        self.assertEqual(merged['d_max'], DEFAULTS['d_max'])
        request = build_request(Quantity.BOUND, merged)
        self.assertEqual(request.ell, 5)
        self.assertIsNone(request.out)


class RowsAndEmittersTest(SimpleTestCase):

    def test_rate_rows(self):
        request = CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_count=5)
        columns, rows = build_rows(request)
        self.assertEqual(len(rows), 3 * 5 + 3 * 5)
        self.assertEqual([row['series'] for row in rows[:15:5]], ['shannon-lower-bound', 'centralized', 'distributed'])
        by_d = {}
        for row in rows:
            by_d.setdefault(row['d'], {})[(row['series'], row['m'])] = row['rate_nats']
        for values in by_d.values():
            self.assertLessEqual(values[('centralized', 3)], values[('bound', 2)] + 1e-12)
            self.assertLessEqual(values[('bound', 2)], values[('distributed', 1)] + 1e-12)
            self.assertAlmostEqual(values[('bound', 3)], values[('centralized', 3)], places=12)

        _, bound_only = build_rows(CurveRequest(Quantity.BOUND, ell=3, rho=0.6, d_count=5))
        self.assertEqual({row['series'] for row in bound_only}, {'bound'})
        self.assertEqual(len(bound_only), 15)

    def test_gap_rows_flag_divergence(self):
        request = CurveRequest(Quantity.GAP, ell=3, rho=0.3, m_values=(2,), d_min=0.6, d_max=0.8, d_count=3)
        columns, rows = build_rows(request)
        self.assertEqual(tuple(columns), GAP_COLUMNS)
        self.assertEqual([row['diverges'] for row in rows], [False, True, False])
        self.assertIsNone(rows[1]['delta_nats'])
        line = render_csv(columns, rows).splitlines()[2]
        self.assertTrue(line.startswith('2,7.'))
        self.assertTrue(line.endswith(',,true'))

    def test_spectrum_rows(self):
        request = CurveRequest(Quantity.SPECTRUM, ell=3, rho=0.6, m_values=(3,), d=0.5)
        _, rows = build_rows(request)
        self.assertEqual([row['uncoded'] for row in rows], [True, True, False])
        self.assertAlmostEqual(rows[2]['distortion'], 0.7, places=12)

    def test_critical_rows(self):
        columns, rows = build_rows(CurveRequest(Quantity.CRITICAL, ell=3, rho=0.6))
        self.assertEqual(tuple(columns), CRITICAL_COLUMNS)
        self.assertEqual(rows[0]['d_c'], 0.0)
        self.assertIsNone(rows[0]['gamma_c'])
        self.assertAlmostEqual(rows[1]['d_c'], 11 / 35, places=12)
        self.assertAlmostEqual(rows[1]['d_c_limit'], 0.2, places=12)
        _, negative = build_rows(CurveRequest(Quantity.CRITICAL, ell=3, rho=-0.3))
        self.assertIsNone(negative[1]['d_c'])
        self.assertAlmostEqual(negative[1]['gamma_c'], 1.3 * 0.4 / 0.3, places=12)

    def test_format_value(self):
        self.assertEqual(format_value(0.1), '1.0000000000000001e-01')
        self.assertEqual(format_value(np.float64(2.5)), '2.5000000000000000e+00')
        self.assertEqual(format_value(True), 'true')
        self.assertEqual(format_value(None), '')
        self.assertEqual(format_value(3), '3')

    def test_csv_layout(self):
        request = CurveRequest(Quantity.BOUND, ell=2, rho=0.5, m_values=(1,), d_count=2)
        text = render(request, *build_rows(request))
        lines = text.split('\n')
        self.assertEqual(lines[0], 'series,m,d,rate_nats,exact,branch')
        self.assertEqual(len(lines), 4)
        self.assertEqual(lines[-1], '')
        self.assertNotIn('\r', text)
        self.assertTrue(lines[1].startswith('bound,1,1.0000000000000000e-02,'))
        self.assertTrue(lines[1].endswith(',true,distributed'))

    def test_json_document_matches_schema(self):
        schema = load_schema()
        for request in (
            CurveRequest(Quantity.RATE, ell=3, rho=0.6, d_count=4, fmt='json'),
            CurveRequest(Quantity.GAP, ell=3, rho=0.3, d_min=0.6, d_max=0.8, d_count=3, fmt='json'),
            CurveRequest(Quantity.SPECTRUM, ell=4, rho=0.3, d=0.6, fmt='json'),
            CurveRequest(Quantity.CRITICAL, ell=4, rho=-0.2, fmt='json'),
        ):
            document = json.loads(render(request, *build_rows(request)))
            jsonschema.validate(document, schema)
            self.assertEqual(document['quantity'], request.quantity.value)
            self.assertEqual(document['columns'], list(build_rows(request)[0]))

    def test_write_atomic(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / 'curve.csv'
            write_atomic(target, 'a,b\n1,2\n')
            write_atomic(target, 'a,b\n3,4\n')
            self.assertEqual(target.read_text(encoding='utf-8'), 'a,b\n3,4\n')
            self.assertEqual(os.listdir(tmp), ['curve.csv'])
            with self.assertRaises(ParameterRangeError):
                write_atomic(Path(tmp) / 'missing' / 'curve.csv', 'x\n')
