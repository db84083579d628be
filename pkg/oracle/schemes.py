"""
Auxiliary-variable schemes for the (ell, m) network

Encoders are indexed by size-m subsets S of {0, ..., ell-1} in
itertools.combinations order. Each encoder emits linear combinations of
the sources in S plus independent Gaussian noise; optionally it also
forwards noisy copies W_i of the sources assigned to it by a partition.
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

from core.exceptions import ParameterRangeError

logger = logging.getLogger('gaussmt')

Subset = Tuple[int, ...]


class Branch(str, Enum):
    MINUS = 'minus'
    PLUS = 'plus'


@dataclass(frozen=True)
class AuxScheme:
    """
    One test-channel design

    `augment` is the target distortion d for the W_i refinement; it needs
    `omega`, the partition of sources over encoders.
    """
    branch: Branch
    gamma: float
    m: int
    augment: Optional[float] = None
    omega: Optional[Mapping[Subset, Subset]] = None

    def __post_init__(self):
        object.__setattr__(self, 'branch', Branch(self.branch))
        if not (self.gamma >= 0):
            raise ParameterRangeError(f"gamma must be non-negative, got {self.gamma}")
        if int(self.m) != self.m or self.m < 1:
            raise ParameterRangeError(f"m must be a positive integer, got {self.m}")
        if self.branch is Branch.MINUS and self.m < 2:
            raise ParameterRangeError("The minus scheme sends m-1 differences and needs m >= 2")
        if self.augment is not None:
            if self.omega is None:
                raise ParameterRangeError("An augmented scheme needs the partition omega")
            if not (0.0 < self.augment < 1.0):
                raise ParameterRangeError(f"Augmentation distortion must lie in (0, 1), got {self.augment}")

    def without_augment(self) -> 'AuxScheme':
        return AuxScheme(branch=self.branch, gamma=self.gamma, m=self.m)


def encoder_subsets(ell: int, m: int) -> List[Subset]:
    """All size-m subsets in lexicographic order."""
    return list(itertools.combinations(range(ell), m))


def omega_partition(ell: int, m: int) -> Dict[Subset, Subset]:
    """
    Sliding-window partition of the sources over the encoders

    The first window {0, ..., m-1} keeps all its sources; each later window
    {i-m+1, ..., i} takes source i alone; every other encoder takes nothing.
    """
    if int(ell) != ell or ell < 2 or int(m) != m or not (1 <= m <= ell):
        raise ParameterRangeError(f"Need ell >= 2 and 1 <= m <= ell, got ell={ell}, m={m}")
    omega: Dict[Subset, Subset] = {subset: () for subset in encoder_subsets(ell, m)}
    first = tuple(range(m))
    omega[first] = first
    for i in range(m, ell):
        omega[tuple(range(i - m + 1, i + 1))] = (i,)
    return omega


def validate_partition(ell: int, m: int, omega: Mapping[Subset, Subset]) -> None:
    """
    Raise ParameterRangeError unless omega assigns every source to exactly
    one encoder that observes it
    """
    subsets = set(encoder_subsets(ell, m))
    seen = set()
    for subset, assigned in omega.items():
        if tuple(subset) not in subsets:
            raise ParameterRangeError(f"{subset} is not a size-{m} subset of {ell} sources")
        if not set(assigned) <= set(subset):
            raise ParameterRangeError(f"Encoder {subset} cannot forward sources {assigned} it does not observe")
        overlap = seen & set(assigned)
        if overlap:
            raise ParameterRangeError(f"Sources {sorted(overlap)} are assigned to more than one encoder")
        seen |= set(assigned)
    if seen != set(range(ell)):
        raise ParameterRangeError(f"Sources {sorted(set(range(ell)) - seen)} are not assigned to any encoder")
