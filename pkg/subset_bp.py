"""
Belief propagation for the q-ary erasure channel with subset messages.

Variable nodes send the extrinsic intersection of the channel message and
their other incoming messages. Constraint nodes send the alphabet minus
every bottleneck set: a union of k incoming messages holding exactly k
values (naked singles, pairs, triples, ...).

The decoder runs a flooding schedule on numpy uint64 bit masks. The scalar
functions below define the node rules; the array kernels apply the same
rules to every node of a graph at once.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config_manager
from codegraph import FactorGraph, ReceivedWord
from core_model import SymbolSet, full_mask, intersect
from error_handler import AlphabetMismatchError, ValidationError, validate_input

logger = logging.getLogger(__name__)

# ============================================================================
# SCALAR NODE RULES
# ============================================================================

def variable_update(channel_msg: SymbolSet, incoming: Sequence[SymbolSet]) -> SymbolSet:
    """channel_msg intersected with every incoming message; may be empty."""
    return reduce(intersect, incoming, channel_msg)

def _check_incoming(incoming: Sequence[SymbolSet], q: int) -> None:
    if len(incoming) > q - 1:
        raise ValidationError("A constraint of degree d_c needs d_c <= q",
                              details={'inputs': len(incoming), 'q': q})
    for j, msg in enumerate(incoming):
        if msg.q != q:
            raise AlphabetMismatchError("Incoming message on another alphabet",
                                        details={'input': j, 'msg.q': msg.q, 'q': q})
        if msg.is_empty():
            raise ValidationError("Incoming message is empty", details={'input': j})

def _tight_union_scalar(masks: Sequence[int]) -> int:
    m = len(masks)
    unions = [0] * (1 << m)
    excluded = 0
    for s in range(1, 1 << m):
        low = s & -s
        unions[s] = unions[s ^ low] | masks[low.bit_length() - 1]
        if unions[s].bit_count() == s.bit_count():
            excluded |= unions[s]
    return excluded

def constraint_update(incoming: Sequence[SymbolSet], q: int) -> SymbolSet:
    """
    {1..q} minus the union of every A = U_{j in J} incoming[j] with
    #A = #J, over all non-empty index subsets J of the inputs.
    """
    _check_incoming(incoming, q)
    excluded = _tight_union_scalar([msg.members for msg in incoming])
    return SymbolSet(full_mask(q) & ~excluded, q)

def sdr_feasible(incoming: Sequence[SymbolSet], v: int) -> bool:
    """
    True iff the inputs admit pairwise distinct representatives, each taken
    from its own set, none equal to v. Exhaustive search, smallest sets first.
    """
    if not incoming:
        return True
    q = incoming[0].q
    _check_incoming(incoming, q)
    banned = 1 << (v - 1) if 1 <= v <= q else 0
    masks = sorted((msg.members & ~banned for msg in incoming), key=int.bit_count)

    def assign(i: int, used: int) -> bool:
        if i == len(masks):
            return True
        free = masks[i] & ~used
        while free:
            low = free & -free
            if assign(i + 1, used | low):
                return True
            free ^= low
        return False

    return assign(0, 0)

# ============================================================================
# ARRAY KERNELS
# ============================================================================

@lru_cache(maxsize=None)
def _subset_sizes(m: int) -> np.ndarray:
    sizes = np.array([bin(s).count('1') for s in range(1 << m)], dtype=np.int64)
    sizes.setflags(write=False)
    return sizes

@lru_cache(maxsize=None)
def _subsets_without(m: int, k: int) -> np.ndarray:
    cols = np.array([s for s in range(1 << m) if not s >> k & 1], dtype=np.int64)
    cols.setflags(write=False)
    return cols

def subset_unions(msgs: np.ndarray) -> np.ndarray:
    """(N, m) masks -> (N, 2^m) unions, column s holding the union over the bits of s."""
    n, m = msgs.shape
    unions = np.zeros((n, 1 << m), dtype=np.uint64)
    for s in range(1, 1 << m):
        low = s & -s
        unions[:, s] = unions[:, s ^ low] | msgs[:, low.bit_length() - 1]
    return unions

def tight_values(msgs: np.ndarray) -> np.ndarray:
    """Subset unions with non-bottleneck columns zeroed."""
    unions = subset_unions(msgs)
    tight = np.bitwise_count(unions).astype(np.int64) == _subset_sizes(msgs.shape[1])[None, :]
    return np.where(tight, unions, np.uint64(0))

def tight_union(msgs: np.ndarray) -> np.ndarray:
    """Row-wise union of all bottleneck sets among the m input columns."""
    return np.bitwise_or.reduce(tight_values(msgs), axis=1)

def constraint_half_iteration(v2c: np.ndarray, graph: FactorGraph) -> np.ndarray:
    """All constraint-to-variable messages from the current variable-to-constraint ones."""
    d_c = graph.params.d_c
    full = np.uint64(full_mask(graph.params.q))
    msgs = v2c[graph.con_edges]
    tv = tight_values(msgs)
    c2v = np.empty_like(v2c)
    for k in range(d_c):
        excluded = np.bitwise_or.reduce(tv[:, _subsets_without(d_c, k)], axis=1)
        c2v[graph.con_edges[:, k]] = full & ~excluded
    return c2v

def variable_half_iteration(c2v: np.ndarray, channel: np.ndarray,
                            graph: FactorGraph) -> Tuple[np.ndarray, np.ndarray]:
    """All variable-to-constraint messages plus the per-variable posteriors."""
    d_v = graph.params.d_v
    msgs = c2v[graph.var_edges]
    v2c = np.empty_like(c2v)
    for k in range(d_v):
        others = [j for j in range(d_v) if j != k]
        v2c[graph.var_edges[:, k]] = channel & np.bitwise_and.reduce(msgs[:, others], axis=1)
    posteriors = channel & np.bitwise_and.reduce(msgs, axis=1)
    return v2c, posteriors

def masks_to_sets(masks: np.ndarray, q: int) -> Tuple[SymbolSet, ...]:
    return tuple(SymbolSet(int(m), q) for m in masks)

# ============================================================================
# DECODER
# ============================================================================

class DecodeStatus(str, Enum):
    SOLVED = 'solved'
    STALLED = 'stalled'
    MAX_ITERATIONS = 'max_iterations'
    CONTRADICTION = 'contradiction'

@dataclass(frozen=True, eq=False)
class DecodeResult:
    status: DecodeStatus
    iterations: int
    posterior_masks: np.ndarray = field(repr=False)
    q: int
    contradiction_variable: Optional[int] = None
    history: Optional[List[Dict[str, np.ndarray]]] = field(default=None, repr=False)

    @property
    def posteriors(self) -> Tuple[SymbolSet, ...]:
        return masks_to_sets(self.posterior_masks, self.q)

    def cardinalities(self) -> np.ndarray:
        return np.bitwise_count(self.posterior_masks).astype(np.int64)

    def unresolved_count(self) -> int:
        return int(np.count_nonzero(self.cardinalities() > 1))

    def decoded_symbols(self) -> np.ndarray:
        """Value of each resolved variable, 0 where the posterior is not a singleton."""
        card = self.cardinalities()
        values = np.zeros(self.posterior_masks.size, dtype=np.int64)
        single = card == 1
        values[single] = np.log2(self.posterior_masks[single].astype(np.float64)).round().astype(np.int64) + 1
        return values

def _first_empty(masks: np.ndarray) -> Optional[int]:
    empty = np.flatnonzero(masks == 0)
    return int(empty[0]) if empty.size else None

@validate_input(max_iters=lambda n: n is None or n >= 0)
def decode(graph: FactorGraph, received: ReceivedWord, max_iters: Optional[int] = None,
           record_history: bool = False) -> DecodeResult:
    """
    Flooding schedule: each iteration updates every constraint-to-variable
    message, then every variable-to-constraint message. Iteration 0 sends
    the channel messages outward with all constraint messages full.
    """
    if len(received) != graph.n_vars or received.q != graph.params.q:
        raise ValidationError("Received word does not match the graph",
                              details={'length': len(received), 'n_vars': graph.n_vars,
                                       'received.q': received.q, 'q': graph.params.q})
    max_iters = config_manager.resolve(max_iters, 'decoder_max_iters')
    q = graph.params.q

    def result(status, it, post, culprit=None):
        return DecodeResult(status, it, post, q, culprit, history if record_history else None)

    channel = received.channel_masks()
    c2v = np.full(graph.n_edges, full_mask(q), dtype=np.uint64)
    v2c = channel[graph.edge_var]
    posteriors = channel.copy()
    history = [{'v2c': v2c.copy(), 'c2v': c2v.copy()}] if record_history else None

    if np.all(np.bitwise_count(posteriors) == 1):
        return result(DecodeStatus.SOLVED, 0, posteriors)

    for it in range(1, max_iters + 1):
        new_c2v = constraint_half_iteration(v2c, graph)
        new_v2c, posteriors = variable_half_iteration(new_c2v, channel, graph)
        if record_history:
            history.append({'v2c': new_v2c.copy(), 'c2v': new_c2v.copy()})

        empty_edge = _first_empty(new_c2v)
        if empty_edge is None:
            empty_edge = _first_empty(new_v2c)
        culprit = _first_empty(posteriors)
        if empty_edge is not None or culprit is not None:
            if culprit is None:
                culprit = int(graph.edge_var[empty_edge])
            logger.debug("Contradiction at iteration %d on variable %d", it, culprit)
            return result(DecodeStatus.CONTRADICTION, it, posteriors, culprit)

        if np.all(np.bitwise_count(posteriors) == 1):
            return result(DecodeStatus.SOLVED, it, posteriors)

        if np.array_equal(new_c2v, c2v) and np.array_equal(new_v2c, v2c):
            return result(DecodeStatus.STALLED, it, posteriors)

        c2v, v2c = new_c2v, new_v2c

    return result(DecodeStatus.MAX_ITERATIONS, max_iters, posteriors)
