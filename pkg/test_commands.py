"""
End-to-end checks of the gaussmt management commands
Runs each command through call_command and inspects what it emits
"""
import csv
import io
import json
import os
import tempfile
from pathlib import Path

import django

# Setup Django environment
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gaussmt.settings')
django.setup()

import jsonschema
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.curves import load_schema
from core.management.commands.rd_curve import Command as RdCurveCommand


def run(name, *args, **options):
    out = io.StringIO()
    call_command(name, *args, stdout=out, stderr=io.StringIO(), **options)
    return out.getvalue()


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class RdCurveCommandTest(SimpleTestCase):

    def test_bound_sits_between_reference_curves(self):
        rows = rows_of(run('rd_curve', '--ell', '4', '--rho', '0.3', '--d-count', '9'))
        by_d = {}
        for row in rows:
            by_d.setdefault(row['d'], {})[(row['series'], row['m'])] = float(row['rate_nats'])
        self.assertEqual(len(by_d), 9)
        for d, values in by_d.items():
            bounds = [values[('bound', str(m))] for m in range(1, 5)]
            for a, b in zip(bounds, bounds[1:]):
                self.assertGreaterEqual(a, b - 1e-12, msg=f"d={d}")
            self.assertLessEqual(values[('centralized', '4')], min(bounds) + 1e-12)
            self.assertGreaterEqual(values[('distributed', '1')], max(bounds) - 1e-12)
            self.assertLessEqual(values[('shannon-lower-bound', '')], values[('centralized', '4')] + 1e-12)

    def test_output_is_byte_identical(self):
        first = run('rd_curve', '--ell', '3', '--rho', '0.6', '--d-count', '11', '--format', 'json')
        second = run('rd_curve', '--ell', '3', '--rho', '0.6', '--d-count', '11', '--format', 'json')
        self.assertEqual(first, second)

    def test_bound_only(self):
        rows = rows_of(run('rd_curve', '--ell', '3', '--m', '2', '--d-count', '5', '--bound-only'))
        self.assertEqual(len(rows), 5)
        self.assertEqual({row['series'] for row in rows}, {'bound'})
        self.assertEqual({row['m'] for row in rows}, {'2'})

    def test_independent_sources_give_identical_rows(self):
        rows = rows_of(run('rd_curve', '--ell', '3', '--rho', '0', '--d-count', '7', '--bound-only'))
        by_d = {}
        for row in rows:
            by_d.setdefault(row['d'], set()).add((row['rate_nats'], row['exact'], row['branch']))
        for values in by_d.values():
            self.assertEqual(len(values), 1)

    def test_json_output_matches_schema(self):
        document = json.loads(run('rd_curve', '--ell', '3', '--d-count', '4', '--format', 'json'))
        jsonschema.validate(document, load_schema())
        self.assertEqual(document['request']['ell'], 3)
        self.assertEqual(document['request']['spacing'], 'linear')

    def test_writes_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / 'rd.csv'
            message = run('rd_curve', '--ell', '3', '--d-count', '4', '--out', str(target))
            self.assertIn('Wrote 24 rows', message)
            self.assertEqual(target.read_text(encoding='utf-8'), run('rd_curve', '--ell', '3', '--d-count', '4'))

    def test_config_file_and_flag_precedence(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / 'curve.env'
            config.write_text("ELL=4\nRHO=0.3\nD_COUNT=3\nD_LOG=true\nFORMAT=json\n", encoding='utf-8')
            document = json.loads(run('rd_curve', '--config', str(config), '--ell', '2'))
        self.assertEqual(document['request']['ell'], 2)
        self.assertEqual(document['request']['rho'], 0.3)
        self.assertEqual(document['request']['d_count'], 3)
        self.assertEqual(document['request']['spacing'], 'log')

    def test_usage_errors_exit_with_one(self):
        for args in (
            ('--rho', '1.5'),
            ('--ell', '3', '--rho', '-0.6'),
            ('--d-min', '0.5', '--d-max', '0.4'),
            ('--ell', '3', '--m', '4'),
            ('--config', '/nonexistent/curve.env'),
        ):
            with self.assertRaises(CommandError, msg=str(args)) as ctx:
                run('rd_curve', *args)
            self.assertEqual(ctx.exception.returncode, 1)

    def test_bad_flag_exits_with_one(self):
        with self.assertRaises(SystemExit) as ctx:
            RdCurveCommand(stdout=io.StringIO(), stderr=io.StringIO()).run_from_argv(
                ['manage.py', 'rd_curve', '--no-such-flag'])
        self.assertEqual(ctx.exception.code, 1)


class GapCurveCommandTest(SimpleTestCase):

    def test_divergence_is_flagged(self):
        rows = rows_of(run('gap_curve', '--ell', '3', '--rho', '0.3', '--m', '2',
                           '--d-min', '0.6', '--d-max', '0.8', '--d-count', '3'))
        self.assertEqual([row['diverges'] for row in rows], ['false', 'true', 'false'])
        self.assertEqual(rows[1]['delta_nats'], '')

    def test_m_is_not_bounded_by_ell(self):
        text = run('gap_curve', '--rho', '0.3', '--m', '1', '--m', '2', '--m', '3', '--m', '4', '--d-count', '5')
        rows = rows_of(text)
        self.assertEqual(sorted({row['m'] for row in rows}), ['1', '2', '3', '4'])
        self.assertEqual(len(rows), 20)
        document = json.loads(run('gap_curve', '--rho', '0.3', '--m', '4', '--d-count', '3', '--format', 'json'))
        jsonschema.validate(document, load_schema())
        self.assertNotIn('ell', document['request'])
        self.assertEqual(document['request']['m'], [4])

    def test_gap_needs_positive_rho(self):
        with self.assertRaises(CommandError) as ctx:
            run('gap_curve', '--ell', '3', '--rho', '-0.3')
        self.assertEqual(ctx.exception.returncode, 1)


class SpectrumCommandTest(SimpleTestCase):

    def test_below_critical_matches_centralized(self):
        rows = rows_of(run('spectrum', '--ell', '4', '--rho', '0.3', '--d', '0.6', '--m', '3', '--m', '4'))
        by_m = {}
        for row in rows:
            by_m.setdefault(row['m'], []).append((row['mode'], row['eigenvalue'], row['distortion'], row['uncoded']))
        self.assertEqual(by_m['3'], by_m['4'])

    def test_uncoded_modes(self):
        rows = rows_of(run('spectrum', '--ell', '3', '--rho', '0.6', '--d', '0.5', '--m', '3'))
        self.assertEqual([row['uncoded'] for row in rows], ['true', 'true', 'false'])

    def test_independent_sources(self):
        rows = rows_of(run('spectrum', '--ell', '3', '--rho', '0', '--d', '0.25'))
        self.assertEqual(len(rows), 9)
        self.assertEqual({float(row['distortion']) for row in rows}, {0.25})

    def test_needs_distortion(self):
        with self.assertRaises(CommandError) as ctx:
            run('spectrum', '--ell', '3', '--rho', '0.6')
        self.assertEqual(ctx.exception.returncode, 1)


class CriticalCommandTest(SimpleTestCase):

    def test_critical_table(self):
        rows = rows_of(run('critical', '--ell', '4', '--rho', '0.3'))
        self.assertEqual([row['m'] for row in rows], ['1', '2', '3', '4'])
        self.assertAlmostEqual(float(rows[1]['d_c']), 0.532, places=12)
        self.assertAlmostEqual(float(rows[2]['d_c']), 133 / 205, places=12)
        self.assertAlmostEqual(float(rows[3]['d_c']), 0.7, places=12)
        self.assertEqual(rows[0]['gamma_c'], '')

    def test_json(self):
        document = json.loads(run('critical', '--ell', '3', '--rho', '0.6', '--format', 'json'))
        jsonschema.validate(document, load_schema())
        self.assertEqual(document['rows'][1]['d_c_limit'], 0.2)


class VerifyCommandTest(SimpleTestCase):

    def test_small_run_passes(self):
        output = run('verify', '--suite', 'plus', '--suite', 'mmse', '--ell', '3')
        self.assertIn('Verifying up to ell=3', output)
        self.assertIn('plus', output)
        self.assertIn('All verification suites passed', output)

    def test_short_suite_name(self):
        lines = run('verify', '--suite', 'prop4', '--ell', '3').splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[1].startswith('minus '))
        self.assertIn('All verification suites passed', lines[2])

    def test_cap_is_a_usage_error(self):
        with self.assertRaises(CommandError) as ctx:
            run('verify', '--ell', '20')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_failure_exits_with_two(self):
        with self.assertRaises(CommandError) as ctx:
            run('verify', '--suite', 'minus', '--ell', '3', '--tol', '1e-30')
        self.assertEqual(ctx.exception.returncode, 2)
