"""
Cross-check every closed form against the dense conditioning oracle
"""
import logging

from oracle.verification import SUITE_ALIASES, SUITES, VerificationRunner

from ._base import GaussmtCommand

logger = logging.getLogger('gaussmt')


class Command(GaussmtCommand):
    help = 'Run the closed-form versus oracle verification suites; exit 2 on any failing case'

    def add_arguments(self, parser):
        parser.add_argument('--suite', action='append', choices=SUITES + tuple(SUITE_ALIASES),
                            help='Suite to run; repeat for several (default: all)')
        parser.add_argument('--ell', type=int, help='Largest ell to sweep (default and cap: GAUSSMT_ORACLE_MAX_ELL)')
        parser.add_argument('--tol', type=float, help='Residual tolerance (default GAUSSMT_VERIFY_TOL)')

    def handle(self, *args, **options):
        runner = VerificationRunner(max_ell=options.get('ell'), tolerance=options.get('tol'))
        self.stdout.write(f"Verifying up to ell={runner.max_ell} with tolerance {runner.tolerance:.1e}")

        reports = runner.run(options.get('suite'))
        for report in reports:
            status = self.style.SUCCESS('ok') if report.passed else self.style.ERROR('FAILED')
            self.stdout.write(
                f"{report.suite:<20} {len(report.cases):>6} checks  max residual {report.max_residual:.3e}  {status}"
            )
        runner.raise_for_failures(reports)
        self.stdout.write(self.style.SUCCESS('All verification suites passed'))
