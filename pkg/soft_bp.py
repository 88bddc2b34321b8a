"""
Probability-vector node operations for SUDOKU constraints.

A DistributionMessage is a length-q float vector over values 1..q; a
MessageMatrix stacks the d_c messages entering one constraint. The
constraint rule weighs each candidate value by the permanent of the other
messages with that value's column removed, which for d_c < q sums over
injective value assignments instead of full permutations.

These are node-level references for checking the subset decoder; there is
no graph loop here.
"""
import math
import logging
from itertools import permutations
from typing import Sequence

import numpy as np

import constants
from core_model import SymbolSet
from codegraph import ERASURE
from error_handler import ContradictionError, InfeasibleConstraintError, ValidationError

logger = logging.getLogger(__name__)

DistributionMessage = np.ndarray
MessageMatrix = np.ndarray

# ============================================================================
# PERMANENTS
# ============================================================================

def _permanent_expansion(matrix: np.ndarray) -> float:
    m, n = matrix.shape
    rows = np.arange(m)
    return float(sum(np.prod(matrix[rows, list(cols)]) for cols in permutations(range(n), m)))

def _permanent_ryser(matrix: np.ndarray) -> float:
    """Inclusion-exclusion over column subsets; rectangular input is padded with ones rows."""
    m, n = matrix.shape
    factor = 1.0
    if m < n:
        matrix = np.vstack([matrix, np.ones((n - m, n))])
        factor = 1.0 / math.factorial(n - m)
    subsets = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
    row_sums = subsets @ matrix.T
    sizes = subsets.sum(axis=1)
    signs = np.where((n - sizes) % 2 == 0, 1.0, -1.0)
    return float(factor * np.sum(signs * np.prod(row_sums, axis=1)))

def injective_permanent(matrix: np.ndarray) -> float:
    """
    Sum over injective maps sigma from rows to columns of prod_i m[i][sigma(i)].
    Needs rows <= columns; a matrix with no rows has permanent 1.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValidationError("Permanent needs a 2-D matrix", details={'shape': str(matrix.shape)})
    m, n = matrix.shape
    if m == 0:
        return 1.0
    if m > n:
        raise ValidationError("More rows than columns: no injective assignment exists",
                              details={'rows': m, 'cols': n})
    if n <= constants.EXACT_PERMANENT_MAX:
        return _permanent_expansion(matrix)
    return _permanent_ryser(matrix)

def permanent(matrix: np.ndarray) -> float:
    """Permanent of a square k x k matrix, k >= 1."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise ValidationError("Permanent needs a non-empty square matrix",
                              details={'shape': str(matrix.shape)})
    return injective_permanent(matrix)

# ============================================================================
# MESSAGES
# ============================================================================

def as_message(probs: Sequence[float]) -> DistributionMessage:
    msg = np.asarray(probs, dtype=float)
    if msg.ndim != 1 or msg.size < 1 or np.any(msg < 0):
        raise ValidationError("A message is a non-negative vector", details={'probs': np.asarray(probs).tolist()})
    return msg

def _normalize(weights: np.ndarray, error_type, message: str) -> DistributionMessage:
    total = float(weights.sum())
    if total < constants.CONTRADICTION_FLOOR:
        raise error_type(message, details={'sum': total})
    return weights / total

def uniform_over(s: SymbolSet) -> DistributionMessage:
    """Uniform distribution over the members of s."""
    if s.is_empty():
        raise ValidationError("No uniform distribution over the empty set")
    msg = np.zeros(s.q)
    msg[[v - 1 for v in s.values()]] = 1.0 / s.cardinality
    return msg

def channel_posterior(observation: int, q: int) -> DistributionMessage:
    """Erasure-channel posterior: atomic on an observed value, uniform on an erasure."""
    if observation == ERASURE:
        return np.full(q, 1.0 / q)
    return uniform_over(SymbolSet.singleton(observation, q))

def support_of(m: DistributionMessage, tol: float = constants.SUPPORT_TOL) -> SymbolSet:
    if tol < 0:
        raise ValidationError("Support tolerance must be non-negative", details={'tol': tol})
    m = as_message(m)
    return SymbolSet.from_values((int(i) + 1 for i in np.flatnonzero(m > tol)), m.size)

# ============================================================================
# NODE RULES
# ============================================================================

def soft_variable_update(channel_msg: DistributionMessage,
                         incoming: Sequence[DistributionMessage]) -> DistributionMessage:
    """Entrywise product of the channel posterior and the incoming messages, renormalized."""
    out = as_message(channel_msg).copy()
    for j, msg in enumerate(incoming):
        msg = as_message(msg)
        if msg.size != out.size:
            raise ValidationError("Message length mismatch", details={'input': j, 'len': msg.size, 'q': out.size})
        out *= msg
    return _normalize(out, ContradictionError, "Variable beliefs share no value")

def _message_matrix(p: MessageMatrix) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[0] > p.shape[1] or np.any(p < 0):
        raise ValidationError("Message matrix must be d_c x q with d_c <= q and non-negative entries",
                              details={'shape': str(p.shape)})
    return p

def _minor(p: np.ndarray, row: int, col: int) -> np.ndarray:
    return np.delete(np.delete(p, row, axis=0), col, axis=1)

def soft_constraint_update(p: MessageMatrix, out_edge: int) -> DistributionMessage:
    """
    Output on out_edge: entry j proportional to p[out_edge][j] times the
    permanent of p with row out_edge and column j removed.
    """
    p = _message_matrix(p)
    d_c, q = p.shape
    if not 0 <= out_edge < d_c:
        raise ValidationError("Output edge out of range", details={'out_edge': out_edge, 'd_c': d_c})
    weights = np.array([p[out_edge, j] * injective_permanent(_minor(p, out_edge, j)) for j in range(q)])
    return _normalize(weights, InfeasibleConstraintError, "No all-distinct assignment has positive weight")

def constraint_output_matrix(p: MessageMatrix) -> np.ndarray:
    """
    Q[i][j] = p[i][j] * perm(P_ij) / perm(P) for every edge i and value j.
    Every row sums to 1; for d_c = q every column does too.
    """
    p = _message_matrix(p)
    d_c, q = p.shape
    total = injective_permanent(p)
    if total < constants.CONTRADICTION_FLOOR:
        raise InfeasibleConstraintError("Permanent of the message matrix vanishes", details={'perm': total})
    out = np.empty((d_c, q))
    for i in range(d_c):
        for j in range(q):
            out[i, j] = p[i, j] * injective_permanent(_minor(p, i, j))
    return out / total
