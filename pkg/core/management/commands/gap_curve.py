from core.curves import Quantity

from ._base import CurveCommand


class Command(CurveCommand):
    help = 'Emit the large-ell gap between the (ell, m) bound and the centralized rate, per m'
    quantity = Quantity.GAP
