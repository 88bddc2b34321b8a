"""
Density evolution for SUDOKU-constraint codes on the q-ary erasure channel.

Subset messages are tracked through their cardinality only. Each node type
gets an exact kernel (ConditionalTable): for every non-decreasing tuple of
input cardinalities, the distribution of the output cardinality over all
input sets consistent with a transmitted codeword. The recursion then
contracts those kernels against the current cardinality pmf.

Conventions:
- variable node: the transmitted value is 1, every input contains 1.
- constraint node: the output goes to a variable holding 1; input m of a
  row (in tuple order) comes from a variable holding m + 2.
"""
import csv
import io
import json
import math
import time
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, permutations
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

import config_manager
import constants
from core_model import CardinalityPmf, CodeParams, format_rational, full_mask
from error_handler import DensityEvolutionError, ValidationError, validate_input
from shared_utils import log_with_context
from subset_bp import tight_union

logger = logging.getLogger(__name__)

VARIABLE = 'variable'
CONSTRAINT = 'constraint'

# ============================================================================
# COMBINATORICS
# ============================================================================

@lru_cache(maxsize=None)
def count_nondecreasing(a: int, b: int) -> int:
    """N(a, b): non-decreasing tuples of length b over 1..a."""
    if a < 1 or b < 1:
        raise ValidationError("N(a, b) needs a >= 1 and b >= 1", details={'a': a, 'b': b})
    if b == 1:
        return a
    return sum(count_nondecreasing(k, b - 1) for k in range(1, a + 1))

def multiplicity(cards: Sequence[int]) -> int:
    """Number of distinct orderings of the multiset cards."""
    if any(c < 1 for c in cards):
        raise ValidationError("Cardinalities start at 1", details={'tuple': list(cards)})
    result = math.factorial(len(cards))
    for count in Counter(cards).values():
        result //= math.factorial(count)
    return result

def nondecreasing_tuples(q: int, length: int) -> List[Tuple[int, ...]]:
    """All non-decreasing cardinality tuples in lexicographic order."""
    return list(combinations_with_replacement(range(1, q + 1), length))

def _sets_containing(value: int, size: int, q: int) -> np.ndarray:
    """Masks of every size-element subset of 1..q that contains value."""
    others = [v for v in range(1, q + 1) if v != value]
    masks = []
    for rest in combinations(others, size - 1):
        mask = 1 << (value - 1)
        for v in rest:
            mask |= 1 << (v - 1)
        masks.append(mask)
    return np.array(masks, dtype=np.uint64)

def _combination_chunks(choices: Sequence[np.ndarray]) -> Iterator[np.ndarray]:
    """Every combination of one mask per input, as (chunk, inputs) arrays."""
    shape = tuple(len(c) for c in choices)
    total = math.prod(shape)
    for start in range(0, total, constants.TABLE_CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + constants.TABLE_CHUNK, total)), shape)
        yield np.stack([choices[m][idx[m]] for m in range(len(choices))], axis=1)

# ============================================================================
# CONDITIONAL TABLES
# ============================================================================

@dataclass(frozen=True)
class TableRow:
    cardinalities: Tuple[int, ...]
    multiplicity: int
    pmf: Tuple[Fraction, ...]

@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Exact node kernel: input cardinality tuple -> output cardinality pmf."""
    q: int
    degree: int
    node: str
    rows: Tuple[TableRow, ...] = field(repr=False)
    _index: np.ndarray = field(init=False, repr=False)
    _gamma: np.ndarray = field(init=False, repr=False)
    _kernel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        index = np.array([[c - 1 for c in r.cardinalities] for r in self.rows], dtype=np.int64)
        gamma = np.array([r.multiplicity for r in self.rows], dtype=float)
        kernel = np.array([[float(x) for x in r.pmf] for r in self.rows], dtype=float)
        for name, arr in (('_index', index), ('_gamma', gamma), ('_kernel', kernel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.rows)

    def row(self, cardinalities: Sequence[int]) -> TableRow:
        key = tuple(sorted(cardinalities))
        for r in self.rows:
            if r.cardinalities == key:
                return r
        raise ValidationError("No such row", details={'tuple': list(cardinalities)})

    def contract(self, p: np.ndarray) -> np.ndarray:
        """sum over rows of multiplicity * kernel row * prod of input probabilities"""
        weights = self._gamma * np.prod(p[self._index], axis=1)
        return weights @ self._kernel

def _table_row(cards: Tuple[int, ...], counts: np.ndarray, total: int) -> TableRow:
    if counts[0]:
        raise DensityEvolutionError("Node kernel produced an empty output set",
                                    details={'tuple': list(cards), 'empty': int(counts[0])})
    return TableRow(cards, multiplicity(cards), tuple(Fraction(int(c), total) for c in counts[1:]))

def _check_table_args(q: int, degree: int, name: str) -> None:
    if q < 2 or degree < 2:
        raise ValidationError(f"Tables need q >= 2 and {name} >= 2", details={'q': q, name: degree})
    if q > constants.MAX_TABLE_Q:
        raise ValidationError("Exact tables are limited to small alphabets",
                              details={'q': q, 'max_q': constants.MAX_TABLE_Q})
    if q > constants.GUARANTEED_TABLE_Q:
        logger.warning("Building a q=%d table; enumeration may take very long", q)

@lru_cache(maxsize=None)
def build_variable_table(q: int, d_v: int) -> ConditionalTable:
    """
    Each input of cardinality c ranges over the C(q-1, c-1) sets containing
    value 1; the output is their intersection.
    """
    _check_table_args(q, d_v, 'd_v')
    started = time.monotonic()
    rows = []
    for cards in nondecreasing_tuples(q, d_v - 1):
        choices = [_sets_containing(1, c, q) for c in cards]
        counts = np.zeros(q + 1, dtype=np.int64)
        for chunk in _combination_chunks(choices):
            out = np.bitwise_and.reduce(chunk, axis=1)
            counts += np.bincount(np.bitwise_count(out), minlength=q + 1)
        rows.append(_table_row(cards, counts, int(counts.sum())))
    log_with_context(logger, 'info', 'Variable table built',
                     {'q': q, 'dv': d_v, 'rows': len(rows), 'seconds': round(time.monotonic() - started, 3)})
    return ConditionalTable(q, d_v, VARIABLE, tuple(rows))

def _constraint_counts(cards: Sequence[int], q: int) -> np.ndarray:
    full = np.uint64(full_mask(q))
    choices = [_sets_containing(m + 2, c, q) for m, c in enumerate(cards)]
    counts = np.zeros(q + 1, dtype=np.int64)
    for chunk in _combination_chunks(choices):
        out = full & ~tight_union(chunk)
        counts += np.bincount(np.bitwise_count(out), minlength=q + 1)
    return counts

@lru_cache(maxsize=None)
def build_constraint_table(q: int, d_c: int, average_orderings: bool = False) -> ConditionalTable:
    """
    Inputs carry source values 2..d_c and must contain them; the output is
    the subset constraint rule applied to each combination. With
    average_orderings, every distinct assignment of the row's cardinalities
    to sources is enumerated and pooled.
    """
    _check_table_args(q, d_c, 'd_c')
    if d_c > q:
        raise ValidationError("A constraint needs d_c <= q", details={'q': q, 'd_c': d_c})
    started = time.monotonic()
    rows = []
    for cards in nondecreasing_tuples(q, d_c - 1):
        orderings = sorted(set(permutations(cards))) if average_orderings else [cards]
        counts = sum(_constraint_counts(order, q) for order in orderings)
        rows.append(_table_row(cards, counts, int(counts.sum())))
    log_with_context(logger, 'info', 'Constraint table built',
                     {'q': q, 'dc': d_c, 'rows': len(rows), 'average_orderings': average_orderings,
                      'seconds': round(time.monotonic() - started, 3)})
    return ConditionalTable(q, d_c, CONSTRAINT, tuple(rows))

# ============================================================================
# PMF MAPS
# ============================================================================

def _check_pmf(table: ConditionalTable, pmf: CardinalityPmf, node: str) -> None:
    if table.node != node:
        raise ValidationError(f"Expected a {node} table", details={'node': table.node})
    if pmf.q != table.q:
        raise ValidationError("Pmf length does not match the table alphabet",
                              details={'pmf_q': pmf.q, 'table_q': table.q})

def vn_map(table: ConditionalTable, pmf_in: CardinalityPmf) -> CardinalityPmf:
    _check_pmf(table, pmf_in, VARIABLE)
    return CardinalityPmf(table.contract(pmf_in.p))

def cn_map(table: ConditionalTable, pmf_in: CardinalityPmf) -> CardinalityPmf:
    _check_pmf(table, pmf_in, CONSTRAINT)
    return CardinalityPmf(table.contract(pmf_in.p))

def _channel(p: np.ndarray, delta: float) -> np.ndarray:
    out = delta * p
    out[0] += 1.0 - delta
    return out

@validate_input(delta=lambda d: 0.0 <= d <= 1.0)
def apply_channel(pmf: CardinalityPmf, delta: float) -> CardinalityPmf:
    """A singleton channel message w.p. 1 - delta, the full set otherwise."""
    return CardinalityPmf(_channel(pmf.p, delta))

# ============================================================================
# RECURSION
# ============================================================================

class DeOutcome(str, Enum):
    CONVERGED = 'converged'
    STALLED = 'stalled'
    BUDGET = 'budget'

@dataclass(frozen=True, eq=False)
class DeTrace:
    """
    v2c[t] is the variable-to-constraint pmf after iteration t (row 0 is the
    channel-only start); c2v[t - 1] is the constraint-to-variable pmf of
    iteration t. Without history only the final rows are kept.
    """
    params: CodeParams
    delta: float
    outcome: DeOutcome
    iterations: int
    v2c: np.ndarray = field(repr=False)
    c2v: np.ndarray = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.outcome is DeOutcome.CONVERGED

    def final_v2c(self) -> CardinalityPmf:
        return CardinalityPmf(self.v2c[-1])

    def final_c2v(self) -> CardinalityPmf:
        return CardinalityPmf(self.c2v[-1])

    def unresolved(self) -> float:
        return float(self.v2c[-1, 1:].sum())

def _renormalize(p: np.ndarray, params: CodeParams, delta: float, it: int) -> np.ndarray:
    total = float(p.sum())
    if abs(total - 1.0) > constants.DE_DRIFT_LIMIT:
        raise DensityEvolutionError("Pmf normalization drifted",
                                    details={'sum': total, 'iteration': it, 'delta': delta, **params.to_dict()})
    return np.clip(p, 0.0, None) / total

@validate_input(delta=lambda d: 0.0 <= d <= 1.0)
def de_iterate(params: CodeParams, delta: float, max_iters: Optional[int] = None,
               tol: Optional[float] = None, record_history: bool = True) -> DeTrace:
    """
    Start from v2c = channel applied to the all-erased pmf, then repeat
    c2v = cn_map(v2c); v2c = channel(vn_map(c2v)) until P(card > 1) <= tol
    (converged), the step is below the stall threshold (stalled), or the
    iteration budget runs out.
    """
    max_iters = config_manager.resolve(max_iters, 'de_max_iters')
    tol = config_manager.resolve(tol, 'de_tol')
    q = params.q
    vtable = build_variable_table(q, params.d_v)
    ctable = build_constraint_table(q, params.d_c)

    start = np.zeros(q)
    start[-1] = 1.0
    v2c = _channel(start, delta)
    v_hist, c_hist = [v2c], []
    c2v = np.zeros(q)
    outcome = DeOutcome.BUDGET
    it = 0

    for it in range(1, max_iters + 1):
        c2v = _renormalize(ctable.contract(v2c), params, delta, it)
        new_v2c = _renormalize(_channel(vtable.contract(c2v), delta), params, delta, it)
        step = float(np.max(np.abs(new_v2c - v2c)))
        v2c = new_v2c
        if record_history:
            v_hist.append(v2c)
            c_hist.append(c2v)
        if v2c[1:].sum() <= tol:
            outcome = DeOutcome.CONVERGED
            break
        if step < constants.DE_STALL_STEP:
            outcome = DeOutcome.STALLED
            break

    if not record_history:
        v_hist, c_hist = [v2c], [c2v]
    logger.debug("DE delta=%s finished %s after %d iterations", delta, outcome.value, it)
    return DeTrace(params, delta, outcome, it, np.array(v_hist), np.array(c_hist).reshape(-1, q))

@dataclass(frozen=True)
class ThresholdResult:
    params: CodeParams
    theta: float
    lower: float
    upper: float
    iterations_cap: int
    convergence_tol: float
    steps: int

    @property
    def bracket(self) -> Tuple[float, float]:
        return self.lower, self.upper

    def to_dict(self) -> Dict:
        return {**self.params.to_dict(), 'theta': self.theta, 'lower': self.lower, 'upper': self.upper,
                'iterations_cap': self.iterations_cap, 'convergence_tol': self.convergence_tol,
                'steps': self.steps}

@validate_input(precision=lambda p: p is None or 0.0 < p < 1.0)
def find_threshold(params: CodeParams, precision: Optional[float] = None,
                   max_iters: Optional[int] = None, tol: Optional[float] = None) -> ThresholdResult:
    """Bisection over [0, 1] on the converged predicate; theta is the bracket midpoint."""
    precision = config_manager.resolve(precision, 'threshold_precision')
    max_iters = config_manager.resolve(max_iters, 'de_max_iters')
    tol = config_manager.resolve(tol, 'de_tol')
    lower, upper = 0.0, 1.0
    steps = 0
    while upper - lower > precision:
        mid = 0.5 * (lower + upper)
        trace = de_iterate(params, mid, max_iters=max_iters, tol=tol, record_history=False)
        if trace.converged:
            lower = mid
        else:
            upper = mid
        steps += 1
        log_with_context(logger, 'debug', 'Bisection step',
                         {'delta': mid, 'outcome': trace.outcome.value, 'lower': lower, 'upper': upper})
    result = ThresholdResult(params, 0.5 * (lower + upper), lower, upper, max_iters, tol, steps)
    log_with_context(logger, 'info', 'Threshold found', result.to_dict())
    return result

# ============================================================================
# RATES
# ============================================================================

@dataclass(frozen=True)
class RateEstimate:
    params: CodeParams
    r_limit: float
    k: Optional[int] = None
    r_k: Optional[float] = None

    def to_dict(self) -> Dict:
        return {**self.params.to_dict(), 'k': self.k, 'r_k': self.r_k, 'r_limit': self.r_limit}

@validate_input(k=lambda k: k >= 0)
def rate_k(params: CodeParams, k: int) -> float:
    """log_q(d_c! ((d_c-1)!)^(k(d_v-1))) / (d_c + k(d_c-1)(d_v-1))"""
    q, d_v, d_c = params.q, params.d_v, params.d_c
    numerator = math.lgamma(d_c + 1) + k * (d_v - 1) * math.lgamma(d_c)
    return numerator / math.log(q) / (d_c + k * (d_c - 1) * (d_v - 1))

def rate_limit(params: CodeParams) -> float:
    return math.lgamma(params.d_c) / math.log(params.q) / (params.d_c - 1)

def rate_estimate(params: CodeParams, k: Optional[int] = None) -> RateEstimate:
    return RateEstimate(params, rate_limit(params), k, None if k is None else rate_k(params, k))

# ============================================================================
# POLYNOMIALS
# ============================================================================

Monomial = Tuple[int, ...]

def table_polynomials(table: ConditionalTable) -> List[Dict[Monomial, Fraction]]:
    """
    P_out(k) for k = 1..q as {exponent vector: coefficient}; exponent
    vector entry c-1 is the power of P_in(c).
    """
    polys: List[Dict[Monomial, Fraction]] = [dict() for _ in range(table.q)]
    for r in table.rows:
        exps = [0] * table.q
        for c in r.cardinalities:
            exps[c - 1] += 1
        key = tuple(exps)
        for k, prob in enumerate(r.pmf):
            if prob:
                polys[k][key] = polys[k].get(key, Fraction(0)) + r.multiplicity * prob
    return polys

def evaluate_polynomial(poly: Dict[Monomial, Fraction], p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float)
    return float(sum(float(coef) * np.prod(p ** np.array(exps)) for exps, coef in poly.items()))

def format_polynomial(poly: Dict[Monomial, Fraction]) -> str:
    terms = []
    for exps, coef in sorted(poly.items(), reverse=True):
        factors = [f"P({c + 1})" + (f"^{e}" if e > 1 else '') for c, e in enumerate(exps) if e]
        prefix = '' if coef == 1 else format_rational(coef) + '*'
        terms.append(prefix + '*'.join(factors))
    return ' + '.join(terms) if terms else '0'

# ============================================================================
# EXPORT
# ============================================================================

def _float_text(x: float) -> str:
    return repr(float(x))

def table_to_csv(table: ConditionalTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['cardinalities', 'multiplicity'] + [f"p{k}" for k in range(1, table.q + 1)])
    for r in table.rows:
        writer.writerow([' '.join(map(str, r.cardinalities)), r.multiplicity]
                        + [format_rational(x) for x in r.pmf])
    return buf.getvalue()

def table_to_dict(table: ConditionalTable) -> Dict:
    return {
        'q': table.q,
        'node': table.node,
        'degree': table.degree,
        'rows': [{'cardinalities': list(r.cardinalities), 'multiplicity': r.multiplicity,
                  'pmf': [format_rational(x) for x in r.pmf]} for r in table.rows],
    }

def table_to_json(table: ConditionalTable) -> str:
    return json.dumps(table_to_dict(table), indent=2)

def _trace_rows(trace: DeTrace) -> List[Tuple[int, str, List[float]]]:
    v2c, c2v = trace.v2c, trace.c2v
    if len(v2c) != len(c2v) + 1:
        return [(trace.iterations, 'c2v', c2v[-1].tolist()), (trace.iterations, 'v2c', v2c[-1].tolist())]
    rows = [(0, 'v2c', v2c[0].tolist())]
    for t in range(1, len(v2c)):
        rows.append((t, 'c2v', c2v[t - 1].tolist()))
        rows.append((t, 'v2c', v2c[t].tolist()))
    return rows

def trace_to_csv(trace: DeTrace) -> str:
    q = trace.params.q
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['iteration', 'message'] + [f"p{k}" for k in range(1, q + 1)])
    for it, msg, probs in _trace_rows(trace):
        writer.writerow([it, msg] + [_float_text(x) for x in probs])
    return buf.getvalue()

def trace_to_dict(trace: DeTrace) -> Dict:
    return {
        **trace.params.to_dict(),
        'delta': trace.delta,
        'outcome': trace.outcome.value,
        'iterations': trace.iterations,
        'unresolved': trace.unresolved(),
        'rows': [{'iteration': it, 'message': msg, 'pmf': probs} for it, msg, probs in _trace_rows(trace)],
    }

def trace_to_json(trace: DeTrace) -> str:
    return json.dumps(trace_to_dict(trace), indent=2)

# ============================================================================
# REPORT
# ============================================================================

def threshold_report(ensembles: Optional[Sequence[Tuple[int, int, int]]] = None,
                     precision: Optional[float] = None) -> List[Dict]:
    """Threshold and conjectured rate for each (q, d_v, d_c)."""
    rows = []
    for q, d_v, d_c in ensembles or constants.REPORT_ENSEMBLES:
        params = CodeParams(q, d_v, d_c)
        result = find_threshold(params, precision=precision)
        rows.append({**params.to_dict(), 'theta': result.theta, 'lower': result.lower,
                     'upper': result.upper, 'rate': rate_limit(params)})
    return rows
