"""
Curve requests, row building and file emitters for the management commands
Rows are tidy (one row per m and d) and rendered with a fixed float format
so a given request always produces the same bytes.
"""
import contextlib
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from dotenv import dotenv_values

from asymptotics.expansions import dcm_limit, delta_gap
from rates.bounds import (
    bound_spectrum,
    critical_distortion,
    critical_gamma_minus,
    critical_gamma_plus,
    upper_bound_rate,
)
from rates.centralized import rate_centralized, shannon_lower_bound
from rates.distributed import rate_distributed

from .exceptions import ParameterRangeError
from .models import SourceModel, validate_distortion, validate_subset_size
from .parallel import ordered_map

logger = logging.getLogger('gaussmt')

SCHEMA_PATH = Path(__file__).resolve().parent / 'schemas' / 'curve.schema.json'


class Quantity(str, Enum):
    RATE = 'rate'
    BOUND = 'bound'
    GAP = 'gap'
    SPECTRUM = 'spectrum'
    CRITICAL = 'critical'


class OutputFormat(str, Enum):
    CSV = 'csv'
    JSON = 'json'


DEFAULTS: Dict[str, Any] = {
    'ell': 3,
    'rho': 0.6,
    'm': None,
    'd_min': 0.01,
    'd_max': 0.99,
    'd_count': 99,
    'd_log': False,
    'format': OutputFormat.CSV.value,
    'out': None,
    'd': None,
}

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off', ''}


@dataclass(frozen=True)
class CurveRequest:
    """
    Everything a command needs to produce one output file
    """
    quantity: Quantity
    ell: int
    rho: float
    m_values: Tuple[int, ...] = ()
    d_min: float = 0.01
    d_max: float = 0.99
    d_count: int = 99
    d_log: bool = False
    fmt: OutputFormat = OutputFormat.CSV
    out: Optional[Path] = None
    d: Optional[float] = None
    model: SourceModel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'quantity', Quantity(self.quantity))
        object.__setattr__(self, 'fmt', OutputFormat(self.fmt))
        object.__setattr__(self, 'model', SourceModel(self.ell, self.rho))
        m_values = tuple(self.m_values) or tuple(range(1, self.ell + 1))
        for m in m_values:
            if self.quantity is Quantity.GAP:
                # the large-ell gap is a limit in ell, so m is not bounded by it
                if int(m) != m or m < 1:
                    raise ParameterRangeError(f"Subset size m must be a positive integer, got {m}")
            else:
                validate_subset_size(self.model, m)
        object.__setattr__(self, 'm_values', tuple(int(m) for m in m_values))

        if self.quantity is Quantity.SPECTRUM:
            if self.d is None:
                raise ParameterRangeError("The spectrum needs a single distortion (--d)")
            validate_distortion(self.d)
        elif self.quantity is not Quantity.CRITICAL:
            if not (0.0 < self.d_min < self.d_max < 1.0):
                raise ParameterRangeError(
                    f"Distortion grid must satisfy 0 < d_min < d_max < 1, got [{self.d_min}, {self.d_max}]"
                )
            if int(self.d_count) != self.d_count or self.d_count < 2:
                raise ParameterRangeError(f"d_count must be an integer >= 2, got {self.d_count}")
        if self.quantity is Quantity.GAP and not (0.0 < self.rho < 1.0):
            raise ParameterRangeError(f"Gap curves need rho in (0, 1), got {self.rho}")

    def describe(self) -> Dict[str, Any]:
        """Request parameters as plain values, for the JSON header."""
        described: Dict[str, Any] = {} if self.quantity is Quantity.GAP else {'ell': self.ell}
        described.update(rho=self.rho, m=list(self.m_values))
        if self.quantity is Quantity.SPECTRUM:
            described['d'] = self.d
        elif self.quantity is not Quantity.CRITICAL:
            described.update(d_min=self.d_min, d_max=self.d_max, d_count=self.d_count,
                             spacing='log' if self.d_log else 'linear')
        return described


def sample_grid(request: CurveRequest) -> np.ndarray:
    """
    Distortion samples, linear or geometric, endpoints included
    """
    if request.d_log:
        return np.geomspace(request.d_min, request.d_max, int(request.d_count))
    return np.linspace(request.d_min, request.d_max, int(request.d_count))


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


_PARSERS = {
    'ell': int,
    'rho': float,
    'm': lambda value: [int(part) for part in value.split(',') if part.strip()],
    'd_min': float,
    'd_max': float,
    'd_count': int,
    'd_log': _parse_bool,
    'format': lambda value: OutputFormat(value.strip().lower()).value,
    'out': str,
    'd': float,
}


def load_config(path) -> Dict[str, Any]:
    """
    Read a flat KEY=value file; keys mirror the long flag names
    """
    path = Path(path)
    if not path.is_file():
        raise ParameterRangeError(f"Config file not found: {path}")
    parsed: Dict[str, Any] = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().lower().replace('-', '_')
        if name not in _PARSERS:
            raise ParameterRangeError(f"Unknown config key {key!r} in {path}")
        if value is None:
            continue
        try:
            parsed[name] = _PARSERS[name](value)
        except ValueError as e:
            raise ParameterRangeError(f"Bad value for {key!r} in {path}: {str(e)}") from e
    logger.debug(f"Loaded config {path}: {sorted(parsed)}")
    return parsed


def merge_options(cli: Dict[str, Any], config: Dict[str, Any]) -> Dict[str, Any]:
    """
    CLI flags win over the config file, which wins over DEFAULTS
    """
    merged = {}
    for key, default in DEFAULTS.items():
        if cli.get(key) is not None:
            merged[key] = cli[key]
        elif config.get(key) is not None:
            merged[key] = config[key]
        else:
            merged[key] = default
    return merged


def build_request(quantity: Quantity, options: Dict[str, Any]) -> CurveRequest:
    return CurveRequest(
        quantity=quantity,
        ell=options['ell'],
        rho=options['rho'],
        m_values=tuple(options['m'] or ()),
        d_min=options['d_min'],
        d_max=options['d_max'],
        d_count=options['d_count'],
        d_log=bool(options['d_log']),
        fmt=options['format'],
        out=Path(options['out']) if options['out'] else None,
        d=options['d'],
    )


# Row builders

RATE_COLUMNS = ('series', 'm', 'd', 'rate_nats', 'exact', 'branch')
GAP_COLUMNS = ('m', 'd', 'delta_nats', 'diverges')
SPECTRUM_COLUMNS = ('m', 'mode', 'eigenvalue', 'distortion', 'uncoded')
CRITICAL_COLUMNS = ('m', 'd_c', 'd_c_limit', 'gamma_c', 'd_c_minus', 'd_c_plus')


def _rate_point(model: SourceModel, series: str, m: Optional[int], d: float) -> Dict[str, Any]:
    if series == 'shannon-lower-bound':
        return {'series': series, 'm': None, 'd': d, 'rate_nats': shannon_lower_bound(model, d),
                'exact': model.rho == 0 or d <= model.critical, 'branch': series}
    if series == 'centralized':
        coded = model.rho == 0 or d <= model.critical
        return {'series': series, 'm': model.ell, 'd': d, 'rate_nats': rate_centralized(model, d),
                'exact': True, 'branch': 'all-modes-coded' if coded else 'modes-uncoded'}
    if series == 'distributed':
        return {'series': series, 'm': 1, 'd': d, 'rate_nats': rate_distributed(model, d).rate_nats,
                'exact': True, 'branch': 'distributed'}
    bound = upper_bound_rate(model, m, d)
    return {'series': series, 'm': m, 'd': d, 'rate_nats': bound.rate_nats,
            'exact': bound.exact, 'branch': bound.justification.value}


def rate_rows(request: CurveRequest) -> List[Dict[str, Any]]:
    """
    Bound rows per (m, d); the rate quantity also carries the reference
    curves (Shannon lower bound, centralized, distributed) first
    """
    grid = [float(d) for d in sample_grid(request)]
    points: List[Tuple[str, Optional[int], float]] = []
    if request.quantity is Quantity.RATE:
        for series in ('shannon-lower-bound', 'centralized', 'distributed'):
            points.extend((series, None, d) for d in grid)
    for m in request.m_values:
        points.extend(('bound', m, d) for d in grid)
    model = request.model
    return ordered_map(lambda point: _rate_point(model, *point), points)


def gap_rows(request: CurveRequest) -> List[Dict[str, Any]]:
    rows = []
    for m in request.m_values:
        for d in sample_grid(request):
            delta = delta_gap(m, request.rho, float(d))
            diverges = math.isinf(delta)
            rows.append({'m': m, 'd': float(d), 'delta_nats': None if diverges else delta, 'diverges': diverges})
    return rows


def spectrum_rows(request: CurveRequest) -> List[Dict[str, Any]]:
    rows = []
    for m in request.m_values:
        result = bound_spectrum(request.model, m, request.d)
        eigenvalues = result.source.values()
        distortions = result.distortion.values()
        for mode in range(request.ell):
            uncoded = result.uncoded[1] if mode == request.ell - 1 else result.uncoded[0]
            rows.append({'m': m, 'mode': mode + 1, 'eigenvalue': float(eigenvalues[mode]),
                         'distortion': float(distortions[mode]), 'uncoded': uncoded})
    return rows


def critical_rows(request: CurveRequest) -> List[Dict[str, Any]]:
    model = request.model
    rows = []
    for m in request.m_values:
        row = {'m': m, 'd_c': None, 'd_c_limit': None, 'gamma_c': None,
               'd_c_minus': model.critical_minus, 'd_c_plus': model.critical_plus}
        if model.rho > 0:
            row['d_c'] = critical_distortion(model, m)
            row['d_c_limit'] = dcm_limit(m, model.rho)
            if m >= 2:
                row['gamma_c'] = critical_gamma_plus(model, m)
        elif model.rho < 0 and m >= 2:
            row['gamma_c'] = critical_gamma_minus(model, m)
        rows.append(row)
    return rows


def build_rows(request: CurveRequest) -> Tuple[Sequence[str], List[Dict[str, Any]]]:
    if request.quantity in (Quantity.RATE, Quantity.BOUND):
        return RATE_COLUMNS, rate_rows(request)
    if request.quantity is Quantity.GAP:
        return GAP_COLUMNS, gap_rows(request)
    if request.quantity is Quantity.SPECTRUM:
        return SPECTRUM_COLUMNS, spectrum_rows(request)
    return CRITICAL_COLUMNS, critical_rows(request)


# Emitters

def format_value(value: Any) -> str:
    float_format = getattr(settings, 'GAUSSMT_FLOAT_FORMAT', '.16e')
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), float_format)
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(format_value(value))
    return value


def render_csv(columns: Sequence[str], rows: List[Dict[str, Any]]) -> str:
    lines = [','.join(columns)]
    lines.extend(','.join(format_value(row[column]) for column in columns) for row in rows)
    return '\n'.join(lines) + '\n'


def render_json(request: CurveRequest, columns: Sequence[str], rows: List[Dict[str, Any]]) -> str:
    document = {
        'quantity': request.quantity.value,
        'request': {key: _json_value(value) if not isinstance(value, list) else value
                    for key, value in request.describe().items()},
        'columns': list(columns),
        'rows': [{column: _json_value(row[column]) for column in columns} for row in rows],
    }
    return json.dumps(document, indent=2) + '\n'


def render(request: CurveRequest, columns: Sequence[str], rows: List[Dict[str, Any]]) -> str:
    if request.fmt is OutputFormat.JSON:
        return render_json(request, columns, rows)
    return render_csv(columns, rows)


def write_atomic(path: Path, text: str) -> None:
    """
    Write to a temporary file in the target directory, then rename over the target
    """
    path = Path(path)
    directory = path.resolve().parent
    if not directory.is_dir():
        raise ParameterRangeError(f"Output directory does not exist: {directory}")
    fd, temporary = tempfile.mkstemp(dir=directory, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(temporary, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(temporary)
        raise


def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, encoding='utf-8') as handle:
        return json.load(handle)


def request_summary(request: CurveRequest) -> str:
    return ', '.join(f"{key}={value}" for key, value in asdict(request).items()
                     if key not in ('model', 'out', 'fmt'))
