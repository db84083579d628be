"""
Eigen-domain view of the bound solution at one distortion
"""
from core.curves import Quantity

from ._base import CurveCommand


class Command(CurveCommand):
    help = 'Emit source eigenvalues and per-mode distortions for each m at a single d'
    quantity = Quantity.SPECTRUM

    def add_grid_arguments(self, parser):
        parser.add_argument('--d', type=float, help='Distortion at which to evaluate the spectrum')
