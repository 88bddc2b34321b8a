"""
Shared domain types for SUDOKU-constraint codes.

Alphabet values are 1-based (1..q); bit i-1 of a SymbolSet stores value i.
Every type here is immutable after construction.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple, Union

import numpy as np

import constants
from error_handler import AlphabetMismatchError, ValidationError

logger = logging.getLogger(__name__)

# Exact rationals for the node kernels.
Rational = Fraction

Permutation = Union[Sequence[int], Mapping[int, int]]

# ============================================================================
# CODE PARAMETERS
# ============================================================================

@dataclass(frozen=True)
class CodeParams:
    """Alphabet size q, variable degree d_v and constraint degree d_c."""
    q: int
    d_v: int
    d_c: int

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ('q', 'd_v', 'd_c'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValidationError(f"{name} must be an integer", details={name: str(value)})
            if value < 2:
                raise ValidationError(f"{name} must be at least 2", details={name: value})
        if self.q > constants.MAX_Q:
            raise ValidationError("Alphabet size above the supported cap",
                                  details={'q': self.q, 'max_q': constants.MAX_Q})
        if self.d_c > self.q:
            raise ValidationError("A constraint needs d_c distinct values, so d_c <= q",
                                  details={'q': self.q, 'd_c': self.d_c})

    def to_dict(self) -> Dict[str, int]:
        return {'q': self.q, 'dv': self.d_v, 'dc': self.d_c}

# ============================================================================
# SYMBOL SETS
# ============================================================================

def _check_q(q: int) -> None:
    if not 1 <= q <= constants.MAX_Q:
        raise ValidationError("Alphabet size out of range", details={'q': q, 'max_q': constants.MAX_Q})

def full_mask(q: int) -> int:
    return (1 << q) - 1

@dataclass(frozen=True)
class SymbolSet:
    """A subset of {1..q} stored as a bit vector."""
    members: int
    q: int

    def __post_init__(self):
        _check_q(self.q)
        if self.members < 0 or self.members > full_mask(self.q):
            raise ValidationError("Set members fall outside the alphabet",
                                  details={'members': bin(self.members), 'q': self.q})

    @classmethod
    def full(cls, q: int) -> 'SymbolSet':
        return cls(full_mask(q), q)

    @classmethod
    def empty(cls, q: int) -> 'SymbolSet':
        return cls(0, q)

    @classmethod
    def singleton(cls, value: int, q: int) -> 'SymbolSet':
        return cls.from_values((value,), q)

    @classmethod
    def from_values(cls, values: Iterable[int], q: int) -> 'SymbolSet':
        _check_q(q)
        mask = 0
        for v in values:
            if not 1 <= v <= q:
                raise ValidationError("Value outside the alphabet", details={'value': v, 'q': q})
            mask |= 1 << (v - 1)
        return cls(mask, q)

    def values(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i in range(self.q) if self.members >> i & 1)

    @property
    def cardinality(self) -> int:
        return self.members.bit_count()

    def is_empty(self) -> bool:
        return self.members == 0

    def intersect(self, other: 'SymbolSet') -> 'SymbolSet':
        return intersect(self, other)

    def union(self, other: 'SymbolSet') -> 'SymbolSet':
        _same_alphabet(self, other)
        return SymbolSet(self.members | other.members, self.q)

    def __contains__(self, value: int) -> bool:
        return 1 <= value <= self.q and bool(self.members >> (value - 1) & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values())

    def __len__(self) -> int:
        return self.cardinality

    def __str__(self) -> str:
        return '{' + ','.join(str(v) for v in self.values()) + '}'

def _same_alphabet(a: SymbolSet, b: SymbolSet) -> None:
    if a.q != b.q:
        raise AlphabetMismatchError("Symbol sets use different alphabet sizes", details={'a.q': a.q, 'b.q': b.q})

def intersect(a: SymbolSet, b: SymbolSet) -> SymbolSet:
    """Values present in both a and b."""
    _same_alphabet(a, b)
    return SymbolSet(a.members & b.members, a.q)

def cardinality(a: SymbolSet) -> int:
    return a.members.bit_count()

def permutation_images(pi: Permutation, q: int) -> Tuple[int, ...]:
    """
    Normalize a permutation of {1..q} to the tuple (pi(1), ..., pi(q)).
    Accepts a sequence of images or a value -> image mapping.
    """
    if isinstance(pi, Mapping):
        images = tuple(pi.get(v, None) for v in range(1, q + 1))
    else:
        images = tuple(pi)
    if len(images) != q or sorted(v if v is not None else 0 for v in images) != list(range(1, q + 1)):
        raise ValidationError("Permutation is not a bijection on the alphabet",
                              details={'pi': str(pi), 'q': q})
    return images

def apply_alphabet_permutation(a: SymbolSet, pi: Permutation) -> SymbolSet:
    """v in result iff pi^-1(v) in a."""
    images = permutation_images(pi, a.q)
    mask = 0
    for i in range(a.q):
        if a.members >> i & 1:
            mask |= 1 << (images[i] - 1)
    return SymbolSet(mask, a.q)

# ============================================================================
# CARDINALITY PMFS
# ============================================================================

def validate_pmf(p: Sequence[float], tol: float = constants.PMF_SUM_TOL) -> np.ndarray:
    """Check that p is a non-empty probability vector and return it as floats."""
    arr = np.array(p, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError("A cardinality pmf is a non-empty vector", details={'shape': str(arr.shape)})
    if np.any(arr < -tol) or np.any(arr > 1 + tol):
        raise ValidationError("Pmf entries must lie in [0, 1]", details={'p': arr.tolist()})
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError("Pmf entries must sum to 1", details={'sum': total})
    return arr

@dataclass(frozen=True, eq=False)
class CardinalityPmf:
    """
    Distribution of message cardinalities; p[k-1] is P(cardinality = k).
    P(0) is zero by construction.
    """
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.clip(validate_pmf(self.p), 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, 'p', arr)

    @classmethod
    def atomic(cls, k: int, q: int) -> 'CardinalityPmf':
        if not 1 <= k <= q:
            raise ValidationError("Cardinality outside 1..q", details={'k': k, 'q': q})
        p = np.zeros(q)
        p[k - 1] = 1.0
        return cls(p)

    @property
    def q(self) -> int:
        return int(self.p.size)

    def prob(self, k: int) -> float:
        return float(self.p[k - 1]) if 1 <= k <= self.q else 0.0

    def unresolved(self) -> float:
        """P(cardinality > 1)"""
        return float(self.p[1:].sum())

    def to_list(self):
        return [float(x) for x in self.p]

# ============================================================================
# RATIONAL FORMATTING
# ============================================================================

def format_rational(x: Fraction) -> str:
    """Render as num/den; 0 and 1 stay plain."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"
