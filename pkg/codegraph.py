"""
Factor graphs for SUDOKU-constraint codes.

Builds random regular interleaver graphs and classic Sudoku grids, samples
valid codewords by backtracking, and pushes codewords through the q-ary
erasure channel.

An unconstrained random regular graph with d_c = q almost never admits a
codeword once n grows, so Monte Carlo work uses build_planted, which draws
the codeword first and wires the interleaver around it.

Randomness: every operation draws from numpy.random.default_rng(seed)
(PCG64). The interleaver is rng.permutation over all sockets, a seeded
Fisher-Yates shuffle; rejected permutations are redrawn from the same
generator, so a seed fixes the whole attempt sequence.
"""
import json
import string
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config_manager
from core_model import CodeParams, SymbolSet, full_mask
from error_handler import (
    ContradictionError,
    GraphConstructionError,
    SamplingBudgetError,
    ValidationError,
    validate_input,
)
from shared_utils import derive_seed, log_with_context

logger = logging.getLogger(__name__)

ERASURE = 0
ERASURE_CHAR = '.'
GRID_ALPHABET = string.digits[1:] + string.ascii_uppercase

Edge = Tuple[int, int, int, int]

# ============================================================================
# GRAPH TYPES
# ============================================================================

@dataclass(frozen=True)
class FactorGraph:
    """
    Bipartite variable/constraint graph.

    edges are (variable, constraint, variable socket, constraint socket) in
    variable-socket order, so edge e belongs to variable e // d_v. Constraint
    sockets number a constraint's edges in that same order.
    """
    params: CodeParams
    n_vars: int
    n_cons: int
    edges: Tuple[Edge, ...] = field(repr=False)
    seed: Optional[int] = None
    var_edges: np.ndarray = field(init=False, repr=False, compare=False)
    con_edges: np.ndarray = field(init=False, repr=False, compare=False)
    edge_var: np.ndarray = field(init=False, repr=False, compare=False)
    edge_con: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d_v, d_c = self.params.d_v, self.params.d_c
        if self.n_vars * d_v != self.n_cons * d_c or len(self.edges) != self.n_vars * d_v:
            raise GraphConstructionError("Socket counts do not match",
                                         details={'n_vars': self.n_vars, 'n_cons': self.n_cons,
                                                  'edges': len(self.edges), **self.params.to_dict()})
        var_edges = np.full((self.n_vars, d_v), -1, dtype=np.int64)
        con_edges = np.full((self.n_cons, d_c), -1, dtype=np.int64)
        for e, (v, c, vs, cs) in enumerate(self.edges):
            if not (0 <= v < self.n_vars and 0 <= c < self.n_cons and 0 <= vs < d_v and 0 <= cs < d_c):
                raise GraphConstructionError("Edge index out of range", details={'edge': e})
            if var_edges[v, vs] != -1 or con_edges[c, cs] != -1:
                raise GraphConstructionError("Socket used twice", details={'edge': e})
            var_edges[v, vs] = e
            con_edges[c, cs] = e
        edge_var = np.array([e[0] for e in self.edges], dtype=np.int64)
        edge_con = np.array([e[1] for e in self.edges], dtype=np.int64)
        attached = np.sort(edge_var[con_edges], axis=1)
        if np.any(attached[:, 1:] == attached[:, :-1]):
            raise GraphConstructionError("A constraint attaches the same variable twice")
        for name, arr in (('var_edges', var_edges), ('con_edges', con_edges),
                          ('edge_var', edge_var), ('edge_con', edge_con)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def constraint_variables(self, c: int) -> List[int]:
        return [int(v) for v in self.edge_var[self.con_edges[c]]]

    def to_dict(self) -> Dict:
        return {
            'q': self.params.q,
            'dv': self.params.d_v,
            'dc': self.params.d_c,
            'n_vars': self.n_vars,
            'n_cons': self.n_cons,
            'edges': [[v, c] for v, c, _, _ in self.edges],
            'seed': self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict) -> 'FactorGraph':
        try:
            params = CodeParams(int(data['q']), int(data['dv']), int(data['dc']))
            pairs = [(int(v), int(c)) for v, c in data['edges']]
            return _graph_from_pairs(params, int(data['n_vars']), int(data['n_cons']), pairs, data.get('seed'))
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError("Malformed graph document", details={'error': str(e)})

    @classmethod
    def from_json(cls, text: str) -> 'FactorGraph':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError("Graph document is not valid JSON", details={'error': str(e)})
        return cls.from_dict(data)

def _graph_from_pairs(params: CodeParams, n_vars: int, n_cons: int,
                      pairs: Sequence[Tuple[int, int]], seed: Optional[int]) -> FactorGraph:
    """Assign sockets by order of appearance; pairs must be in variable-socket order."""
    var_fill = [0] * n_vars
    con_fill = [0] * n_cons
    edges = []
    for v, c in pairs:
        if not (0 <= v < n_vars and 0 <= c < n_cons):
            raise GraphConstructionError("Edge endpoint out of range", details={'var': v, 'con': c})
        if var_fill[v] >= params.d_v or con_fill[c] >= params.d_c:
            raise GraphConstructionError("Node degree exceeded", details={'var': v, 'con': c})
        edges.append((v, c, var_fill[v], con_fill[c]))
        var_fill[v] += 1
        con_fill[c] += 1
    return FactorGraph(params, n_vars, n_cons, tuple(edges), seed)

@dataclass(frozen=True, eq=False)
class Codeword:
    """Values 1..q, one per variable."""
    symbols: np.ndarray
    q: int

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, 'symbols', arr)

    def __len__(self) -> int:
        return int(self.symbols.size)

@dataclass(frozen=True, eq=False)
class ReceivedWord:
    """Channel output; ERASURE (0) marks an erased symbol."""
    observations: np.ndarray
    q: int

    def __post_init__(self):
        arr = np.array(self.observations, dtype=np.int64)
        if arr.ndim != 1 or np.any(arr < 0) or np.any(arr > self.q):
            raise ValidationError("Observations must be erasures or values in 1..q", details={'q': self.q})
        arr.setflags(write=False)
        object.__setattr__(self, 'observations', arr)

    def __len__(self) -> int:
        return int(self.observations.size)

    @property
    def erased(self) -> np.ndarray:
        return self.observations == ERASURE

    def erasure_fraction(self) -> float:
        return float(self.erased.mean()) if len(self) else 0.0

    def channel_masks(self) -> np.ndarray:
        """Channel messages as bit masks: singleton for an observation, full set for an erasure."""
        obs = self.observations.astype(np.uint64)
        singles = np.left_shift(np.uint64(1), np.maximum(obs, 1) - np.uint64(1))
        return np.where(self.erased, np.uint64(full_mask(self.q)), singles).astype(np.uint64)

# ============================================================================
# GRAPH BUILDERS
# ============================================================================

@validate_input(n_vars=lambda n: n >= 1)
def build_regular(params: CodeParams, n_vars: int, seed: int,
                  max_attempts: Optional[int] = None) -> FactorGraph:
    """
    Random (d_v, d_c)-regular graph through a uniformly random socket
    permutation. Permutations that place one variable twice in a constraint
    are redrawn from the same generator.
    """
    d_v, d_c = params.d_v, params.d_c
    if (n_vars * d_v) % d_c:
        raise ValidationError("n_vars * d_v must be divisible by d_c",
                              details={'n_vars': n_vars, **params.to_dict()})
    max_attempts = config_manager.resolve(max_attempts, 'graph_max_attempts')
    n_sockets = n_vars * d_v
    n_cons = n_sockets // d_c
    rng = np.random.default_rng(seed)
    socket_var = np.arange(n_sockets) // d_v

    for attempt in range(1, max_attempts + 1):
        perm = rng.permutation(n_sockets)
        # constraint socket s receives variable socket order[s]
        order = np.argsort(perm)
        attached = np.sort(socket_var[order].reshape(n_cons, d_c), axis=1)
        if np.any(attached[:, 1:] == attached[:, :-1]):
            continue
        pairs = list(zip(socket_var.tolist(), (perm // d_c).tolist()))
        if attempt > 1:
            log_with_context(logger, 'debug', 'Interleaver resampled',
                             {'attempts': attempt, 'n_vars': n_vars, **params.to_dict()})
        return _graph_from_pairs(params, n_vars, n_cons, pairs, seed)

    raise GraphConstructionError("No interleaver without repeated variables found",
                                 details={'attempts': max_attempts, 'n_vars': n_vars, **params.to_dict()})

@validate_input(n_vars=lambda n: n >= 1)
def build_planted(params: CodeParams, n_vars: int, seed: int) -> Tuple[FactorGraph, Codeword]:
    """
    Random (d_v, d_c)-regular graph wired around a codeword drawn first.

    The codeword holds every value n_vars / q times. Constraint slot s
    (constraint s // d_c) is reserved for value s % q + 1, so each
    constraint gets d_c distinct values. Variable sockets of value x are
    matched to the slots of value x by a seeded shuffle. A constraint never
    sees one variable twice because it has at most one slot per value.
    """
    q, d_v, d_c = params.q, params.d_v, params.d_c
    if n_vars % q or (n_vars * d_v) % d_c:
        raise ValidationError("n_vars must be divisible by q and n_vars * d_v by d_c",
                              details={'n_vars': n_vars, **params.to_dict()})
    n_sockets = n_vars * d_v
    n_cons = n_sockets // d_c
    rng = np.random.default_rng(seed)

    symbols = rng.permutation(np.repeat(np.arange(1, q + 1), n_vars // q))
    socket_value = np.repeat(symbols, d_v)
    slot_value = np.arange(n_sockets) % q + 1
    con_label = rng.permutation(n_cons)
    socket_con = np.empty(n_sockets, dtype=np.int64)
    for value in range(1, q + 1):
        slots = rng.permutation(np.flatnonzero(slot_value == value))
        socket_con[socket_value == value] = con_label[slots // d_c]

    pairs = list(zip((np.arange(n_sockets) // d_v).tolist(), socket_con.tolist()))
    graph = _graph_from_pairs(params, n_vars, n_cons, pairs, seed)
    log_with_context(logger, 'debug', 'Planted graph built', {'n_vars': n_vars, **params.to_dict()})
    return graph, Codeword(symbols, q)

def build_classic_sudoku(box_rows: int, box_cols: int) -> FactorGraph:
    """
    q x q Sudoku with q = box_rows * box_cols. Variables are cells in
    row-major order; constraints are q rows, then q columns, then q boxes.
    """
    if box_rows < 2 or box_cols < 2:
        raise ValidationError("Boxes need at least 2 rows and 2 columns",
                              details={'box_rows': box_rows, 'box_cols': box_cols})
    q = box_rows * box_cols
    params = CodeParams(q, 3, q)
    pairs = []
    for row in range(q):
        for col in range(q):
            cell = row * q + col
            box = (row // box_rows) * box_rows + col // box_cols
            pairs.extend([(cell, row), (cell, q + col), (cell, 2 * q + box)])
    return _graph_from_pairs(params, q * q, 3 * q, pairs, None)

# ============================================================================
# CODEWORDS
# ============================================================================

def audit_codeword(graph: FactorGraph, symbols: Sequence[int]) -> List[int]:
    """Indices of constraints whose variables do not hold pairwise distinct values."""
    values = np.asarray(symbols, dtype=np.int64)[graph.edge_var[graph.con_edges]]
    values = np.sort(values, axis=1)
    bad = np.any(values[:, 1:] == values[:, :-1], axis=1) | np.any(values < 1, axis=1) \
        | np.any(values > graph.params.q, axis=1)
    return [int(c) for c in np.flatnonzero(bad)]

def _neighbors(graph: FactorGraph) -> List[List[int]]:
    adj = [set() for _ in range(graph.n_vars)]
    for c in range(graph.n_cons):
        members = graph.constraint_variables(c)
        for v in members:
            adj[v].update(members)
    for v, s in enumerate(adj):
        s.discard(v)
    return [sorted(s) for s in adj]

def _search(neighbors: List[List[int]], domains: List[int], q: int,
            rng: np.random.Generator, budget: int) -> Tuple[Optional[List[int]], str]:
    """
    Depth-first search with forward checking, minimum-remaining-values
    variable order and shuffled value order. Returns (assignment, status)
    where status is 'found', 'exhausted' or 'budget'.
    """
    n = len(domains)
    if n == 0:
        return [], 'found'
    domains = list(domains)
    sizes = [d.bit_count() for d in domains]
    if min(sizes) == 0:
        return None, 'exhausted'
    sentinel = q + 1
    open_sizes = np.array(sizes, dtype=np.int64)
    assignment = [0] * n
    trail: List[Tuple[int, int]] = []
    expansions = 0

    def frame():
        var = int(np.argmin(open_sizes))
        vals = [i for i in range(q) if domains[var] >> i & 1]
        rng.shuffle(vals)
        return [var, vals, len(trail)]

    def undo(mark):
        while len(trail) > mark:
            u, bit = trail.pop()
            domains[u] |= 1 << bit
            sizes[u] += 1
            open_sizes[u] += 1

    stack = [frame()]
    while stack:
        var, vals, mark = stack[-1]
        undo(mark)
        if not vals:
            stack.pop()
            open_sizes[var] = sizes[var]
            continue
        bit = vals.pop()
        expansions += 1
        if expansions > budget:
            return None, 'budget'
        open_sizes[var] = sentinel
        assignment[var] = bit + 1
        ok = True
        for u in neighbors[var]:
            if open_sizes[u] == sentinel or not domains[u] >> bit & 1:
                continue
            domains[u] &= ~(1 << bit)
            sizes[u] -= 1
            open_sizes[u] -= 1
            trail.append((u, bit))
            if sizes[u] == 0:
                ok = False
                break
        if not ok:
            continue
        if len(stack) == n:
            return assignment, 'found'
        stack.append(frame())
    return None, 'exhausted'

def _solve_with_restarts(graph: FactorGraph, domains: List[int], seed: int,
                         node_budget: Optional[int], max_restarts: Optional[int]) -> Codeword:
    node_budget = config_manager.resolve(node_budget, 'sampler_budget')
    max_restarts = config_manager.resolve(max_restarts, 'sampler_restarts')
    neighbors = _neighbors(graph)
    for restart in range(max_restarts + 1):
        run_seed = seed if restart == 0 else derive_seed(seed, restart)
        rng = np.random.default_rng(run_seed)
        assignment, status = _search(neighbors, domains, graph.params.q, rng, node_budget)
        if status == 'found':
            return Codeword(assignment, graph.params.q)
        if status == 'exhausted':
            raise ContradictionError("Search space exhausted: no valid assignment exists",
                                     details={'n_vars': graph.n_vars, **graph.params.to_dict()})
        log_with_context(logger, 'info', 'Codeword search restarted',
                         {'restart': restart + 1, 'node_budget': node_budget})
    raise SamplingBudgetError("No codeword found within the search budget",
                              details={'node_budget': node_budget, 'restarts': max_restarts,
                                       'n_vars': graph.n_vars, **graph.params.to_dict()})

def sample_codeword(graph: FactorGraph, seed: int, node_budget: Optional[int] = None,
                    max_restarts: Optional[int] = None) -> Codeword:
    """
    A valid codeword found by randomized backtracking. After node_budget
    expansions the search restarts with derive_seed(seed, restart).
    """
    domains = [full_mask(graph.params.q)] * graph.n_vars
    return _solve_with_restarts(graph, domains, seed, node_budget, max_restarts)

def relabel_codeword(cw: Codeword, seed: int) -> Codeword:
    """The codeword under a seeded random permutation of the alphabet; still valid on the same graph."""
    images = np.random.default_rng(seed).permutation(cw.q) + 1
    return Codeword(images[cw.symbols - 1], cw.q)

def complete_assignment(graph: FactorGraph, received: ReceivedWord, seed: int = 0,
                        node_budget: Optional[int] = None,
                        max_restarts: Optional[int] = None) -> Codeword:
    """Backtracking completion of the observed symbols into a full codeword."""
    if len(received) != graph.n_vars or received.q != graph.params.q:
        raise ValidationError("Received word does not match the graph",
                              details={'length': len(received), 'n_vars': graph.n_vars})
    check_givens(graph, received)
    domains = [int(m) for m in received.channel_masks()]
    return _solve_with_restarts(graph, domains, seed, node_budget, max_restarts)

def check_givens(graph: FactorGraph, received: ReceivedWord) -> None:
    """Raise ContradictionError when two observed symbols clash in one constraint."""
    obs = received.observations[graph.edge_var[graph.con_edges]]
    for c, row in enumerate(obs):
        given = row[row != ERASURE]
        if given.size != np.unique(given).size:
            raise ContradictionError("Repeated value among the givens of one constraint",
                                     details={'constraint': c, 'values': given.tolist()})

# ============================================================================
# ERASURE CHANNEL
# ============================================================================

@validate_input(delta=lambda d: 0.0 <= d <= 1.0)
def erase(cw: Codeword, delta: float, seed: int) -> ReceivedWord:
    """Each symbol independently replaced by the erasure mark with probability delta."""
    rng = np.random.default_rng(seed)
    mask = rng.random(len(cw)) < delta
    return ReceivedWord(np.where(mask, ERASURE, cw.symbols), cw.q)

# ============================================================================
# GRID TEXT FORMAT
# ============================================================================

def parse_grid(text: str, q: int) -> ReceivedWord:
    """
    Row-major grid of q*q characters; digits then letters for values,
    '.' or '0' for erasures. Whitespace is ignored.
    """
    if q > len(GRID_ALPHABET):
        raise ValidationError("Grid text supports q up to 35", details={'q': q})
    chars = [ch for ch in text if not ch.isspace()]
    if len(chars) != q * q:
        raise ValidationError("Grid has the wrong number of cells",
                              details={'expected': q * q, 'found': len(chars)})
    lookup = {ch: i + 1 for i, ch in enumerate(GRID_ALPHABET[:q])}
    lookup.update({ch.lower(): v for ch, v in lookup.items()})
    values = []
    for pos, ch in enumerate(chars):
        if ch in (ERASURE_CHAR, '0'):
            values.append(ERASURE)
        elif ch in lookup:
            values.append(lookup[ch])
        else:
            raise ValidationError("Invalid grid character", details={'position': pos, 'char': ch})
    return ReceivedWord(values, q)

def symbol_char(value: int) -> str:
    return ERASURE_CHAR if value == ERASURE else GRID_ALPHABET[value - 1]

def format_grid(values: Sequence[int], q: int, line_breaks: bool = True) -> str:
    chars = [symbol_char(int(v)) for v in values]
    if not line_breaks:
        return ''.join(chars)
    return '\n'.join(''.join(chars[r * q:(r + 1) * q]) for r in range(q))

def format_candidates(posteriors: Sequence[SymbolSet], q: int) -> str:
    """Pencil-mark view: one line per row, each cell's candidate set."""
    width = max(len(''.join(symbol_char(v) for v in s.values())) for s in posteriors) if posteriors else 1
    lines = []
    for r in range(q):
        cells = [''.join(symbol_char(v) for v in posteriors[r * q + c].values()).ljust(width)
                 for c in range(q)]
        lines.append(' '.join(cells).rstrip())
    return '\n'.join(lines)
