"""
Ordered fan-out for grid sweeps
"""
from typing import Callable, Iterable, List, Optional, TypeVar

import joblib
from django.conf import settings

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(func: Callable[[T], R], items: Iterable[T], n_jobs: Optional[int] = None) -> List[R]:
    """
    Apply func to every item, results in input order

    numpy/scipy release the GIL inside LAPACK, so threads are enough.
    """
    items = list(items)
    n_jobs = n_jobs if n_jobs is not None else getattr(settings, 'GAUSSMT_N_JOBS', 1)
    if n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    return joblib.Parallel(n_jobs=n_jobs, prefer="threads")(
        joblib.delayed(func)(item) for item in items
    )
