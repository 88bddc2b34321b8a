"""
Monte Carlo erasure-channel campaigns on finite SUDOKU-constraint codes.

One planted graph per campaign (built from the base seed); each trial draws
its own codeword by relabeling the planted one, erases it and decodes. Trial
t at grid point i draws from derive_seed(base, i, t), so results do not
depend on execution order or on the number of workers.
"""
import csv
import io
import json
import sys
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

import config_manager
import constants
from codegraph import Codeword, FactorGraph, build_planted, erase, relabel_codeword
from core_model import CodeParams
from error_handler import ContradictionError, ValidationError
from shared_utils import derive_seed, log_with_context, write_output
from subset_bp import DecodeStatus, decode

logger = logging.getLogger(__name__)

CSV_HEADER = ['delta', 'trials', 'word_fail', 'sym_unresolved', 'mean_iters',
              'solved', 'stalled', 'budget', 'wilson_lo', 'wilson_hi']

# ============================================================================
# CONFIGURATION AND RESULTS
# ============================================================================

@dataclass(frozen=True)
class SimConfig:
    params: CodeParams
    n_vars: int
    delta_grid: Tuple[float, ...]
    trials: int
    seed: int = 0
    max_iters: Optional[int] = None
    workers: int = 1
    progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'delta_grid', tuple(float(d) for d in self.delta_grid))
        bad = [d for d in self.delta_grid if not 0.0 <= d <= 1.0]
        if bad:
            raise ValidationError("Erasure probabilities must lie in [0, 1]", details={'deltas': bad})
        if self.trials < 1:
            raise ValidationError("At least one trial per point is required", details={'trials': self.trials})
        if self.n_vars < 1:
            raise ValidationError("n_vars must be positive", details={'n_vars': self.n_vars})
        if self.workers < 1:
            raise ValidationError("workers must be positive", details={'workers': self.workers})

    def to_dict(self) -> Dict:
        return {**self.params.to_dict(), 'n_vars': self.n_vars, 'deltas': list(self.delta_grid),
                'trials': self.trials, 'seed': self.seed, 'max_iters': self.max_iters}

@dataclass(frozen=True)
class DeltaStats:
    delta: float
    trials: int
    word_fail: float
    sym_unresolved: float
    mean_iters: float
    solved: int
    stalled: int
    budget: int
    wilson_lo: float
    wilson_hi: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.wilson_hi - self.wilson_lo)

@dataclass(frozen=True)
class SimStats:
    config: SimConfig
    rows: Tuple[DeltaStats, ...] = field(default=())

    def to_dict(self) -> Dict:
        return {'config': self.config.to_dict(), 'rows': [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([_num(getattr(r, name)) for name in CSV_HEADER])
        return buf.getvalue()

def _num(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.10g')

def wilson_interval(failures: int, trials: int,
                    confidence: float = constants.WILSON_CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValidationError("Wilson interval needs at least one trial")
    z = float(norm.ppf(0.5 + confidence / 2))
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)

# ============================================================================
# TRIALS
# ============================================================================

@dataclass(frozen=True)
class _Tally:
    failures: int = 0
    unresolved: int = 0
    iterations: int = 0
    solved: int = 0
    stalled: int = 0
    budget: int = 0

def _run_point(graph: FactorGraph, planted: Codeword, delta: float, delta_idx: int,
               trials: int, base_seed: int, max_iters: Optional[int],
               bar: Optional[tqdm] = None) -> _Tally:
    failures = unresolved = iterations = solved = stalled = budget = 0
    for trial in range(trials):
        trial_seed = derive_seed(base_seed, delta_idx, trial)
        cw = relabel_codeword(planted, derive_seed(trial_seed, 0))
        received = erase(cw, delta, derive_seed(trial_seed, 1))
        result = decode(graph, received, max_iters=max_iters)
        if result.status is DecodeStatus.CONTRADICTION:
            raise ContradictionError("Decoder contradicted a valid codeword",
                                     details={'delta': delta, 'trial': trial,
                                              'variable': result.contradiction_variable})
        n_unresolved = result.unresolved_count()
        failures += n_unresolved > 0
        unresolved += n_unresolved
        iterations += result.iterations
        solved += result.status is DecodeStatus.SOLVED
        stalled += result.status is DecodeStatus.STALLED
        budget += result.status is DecodeStatus.MAX_ITERATIONS
        if bar is not None:
            bar.update(1)
    return _Tally(failures, unresolved, iterations, solved, stalled, budget)

def _point_task(args) -> _Tally:
    return _run_point(*args)

def _summarize(delta: float, tally: _Tally, trials: int, n_vars: int) -> DeltaStats:
    lo, hi = wilson_interval(tally.failures, trials)
    return DeltaStats(
        delta=delta,
        trials=trials,
        word_fail=tally.failures / trials,
        sym_unresolved=tally.unresolved / (trials * n_vars),
        mean_iters=tally.iterations / trials,
        solved=tally.solved,
        stalled=tally.stalled,
        budget=tally.budget,
        wilson_lo=lo,
        wilson_hi=hi,
    )

def run_campaign(config: SimConfig) -> SimStats:
    """Word and symbol failure rates for every erasure probability in the grid."""
    graph, planted = build_planted(config.params, config.n_vars, config.seed)
    max_iters = config_manager.resolve(config.max_iters, 'decoder_max_iters')
    log_with_context(logger, 'info', 'Campaign started', config.to_dict())

    tasks = [(graph, planted, delta, i, config.trials, config.seed, max_iters)
             for i, delta in enumerate(config.delta_grid)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            tallies: List[_Tally] = list(tqdm(pool.map(_point_task, tasks), total=len(tasks),
                                              disable=not config.progress, file=sys.stderr, desc='points'))
    else:
        with tqdm(total=len(tasks) * config.trials, disable=not config.progress,
                  file=sys.stderr, desc='trials') as bar:
            tallies = [_run_point(*task, bar=bar) for task in tasks]

    rows = []
    for delta, tally in zip(config.delta_grid, tallies):
        row = _summarize(delta, tally, config.trials, config.n_vars)
        log_with_context(logger, 'info', 'Point finished', asdict(row))
        rows.append(row)
    return SimStats(config, tuple(rows))

def write_csv(stats: SimStats, path: Optional[str]) -> None:
    write_output(stats.to_csv(), path)

def is_statistically_nondecreasing(rows: Sequence[DeltaStats]) -> bool:
    """No drop in word-failure rate larger than twice the combined Wilson half-widths."""
    ordered = sorted(rows, key=lambda r: r.delta)
    return all(b.word_fail >= a.word_fail - 2 * (a.half_width + b.half_width)
               for a, b in zip(ordered, ordered[1:]))
