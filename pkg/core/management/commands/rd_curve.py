"""
Rate-distortion curves: the (ell, m) bound per m plus the reference curves
"""
from core.curves import Quantity

from ._base import CurveCommand


class Command(CurveCommand):
    help = 'Emit r^(ell,m)(d) for each m, with the Shannon lower bound, centralized and distributed curves'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--bound-only', action='store_true',
                            help='Only the per-m bound rows, without the reference curves')

    def get_quantity(self, options) -> Quantity:
        return Quantity.BOUND if options.get('bound_only') else Quantity.RATE
