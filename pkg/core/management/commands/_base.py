"""
Shared plumbing for the gaussmt management commands
Maps gaussmt errors onto exit codes: 1 for usage and range problems,
2 for numerical or verification failures.
"""
import logging
import sys

from django.core.management.base import BaseCommand, CommandError

from core.curves import (
    OutputFormat,
    Quantity,
    build_request,
    build_rows,
    load_config,
    merge_options,
    render,
    request_summary,
    write_atomic,
)
from core.exceptions import NumericalError, ParameterRangeError

logger = logging.getLogger('gaussmt')

EXIT_USAGE = 1
EXIT_NUMERIC = 2


class GaussmtCommand(BaseCommand):
    requires_system_checks = []

    def run_from_argv(self, argv):
        # argparse exits with 2 on bad flags; usage errors are exit 1 here
        parser = self.create_parser(argv[0], argv[1])
        try:
            parser.parse_args(argv[2:])
        except CommandError as e:
            self.stderr.write(str(e))
            sys.exit(EXIT_USAGE)
        except SystemExit as e:
            if e.code:
                sys.exit(EXIT_USAGE)
            raise
        super().run_from_argv(argv)

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except ParameterRangeError as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]}: {str(e)}")
            raise CommandError(str(e), returncode=EXIT_USAGE) from e
        except NumericalError as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]}: {str(e)}")
            raise CommandError(str(e), returncode=EXIT_NUMERIC) from e


class CurveCommand(GaussmtCommand):
    """
    Base for commands that turn a CurveRequest into a CSV or JSON table
    """
    quantity = Quantity.RATE

    def add_arguments(self, parser):
        parser.add_argument('--ell', type=int, help='Number of sources (default 3)')
        parser.add_argument('--rho', type=float, help='Common correlation coefficient (default 0.6)')
        parser.add_argument('--m', type=int, action='append',
                            help='Subset size; repeat for several (default: every m from 1 to ell)')
        parser.add_argument('--out', help='Output file; written atomically. Defaults to stdout')
        parser.add_argument('--format', choices=[f.value for f in OutputFormat], help='csv (default) or json')
        parser.add_argument('--config', help='Flat KEY=value file with defaults for any of these flags')
        self.add_grid_arguments(parser)

    def add_grid_arguments(self, parser):
        parser.add_argument('--d-min', type=float, help='Smallest distortion (default 0.01)')
        parser.add_argument('--d-max', type=float, help='Largest distortion (default 0.99)')
        parser.add_argument('--d-count', type=int, help='Number of grid points (default 99)')
        parser.add_argument('--d-log', action='store_true', default=None, help='Geometric spacing')

    def get_quantity(self, options) -> Quantity:
        return self.quantity

    def handle(self, *args, **options):
        config = load_config(options['config']) if options.get('config') else {}
        merged = merge_options(options, config)
        request = build_request(self.get_quantity(options), merged)
        logger.info(f"{request.quantity.value}: {request_summary(request)}")

        columns, rows = build_rows(request)
        text = render(request, columns, rows)
        if request.out is None:
            self.stdout.write(text, ending='')
            return
        write_atomic(request.out, text)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(rows)} rows to {request.out}"))
