from core.curves import Quantity

from ._base import CurveCommand


class Command(CurveCommand):
    help = 'Emit the critical distortions and critical test-channel variances for each m'
    quantity = Quantity.CRITICAL

    def add_grid_arguments(self, parser):
        pass
