#!/usr/bin/env python3
"""
Command line front end.

    python cli.py tables --q 4 --node constraint --dc 4
    python cli.py threshold --q 3 --dv 3 --dc 3
    python cli.py de --q 3 --dv 3 --dc 3 --delta 0.9
    python cli.py rate --q 4 --dc 4
    python cli.py sim --q 4 --dv 3 --dc 4 --n 1200 --deltas 0.7,0.99 --trials 200 --seed 7
    python cli.py sudoku solve puzzles/easy.txt
    python cli.py sudoku sample --box-rows 3 --box-cols 3 --seed 1
    python cli.py graph --q 4 --dv 3 --dc 4 --n 12
    python cli.py report

Data goes to stdout (or --out), diagnostics to stderr. Exit codes: 0 on
success, 1 on runtime failure, 2 on usage errors.
"""
import csv
import io
import sys
import logging
import argparse
from typing import Callable, Dict, List, Optional, Sequence

import config_manager
import density_evolution as de
import simulator
from codegraph import (
    build_classic_sudoku,
    build_planted,
    build_regular,
    check_givens,
    format_candidates,
    format_grid,
    parse_grid,
    sample_codeword,
    symbol_char,
)
from core_model import CodeParams
from error_handler import (
    EXIT_OK,
    SudokuCodeError,
    ValidationError,
    build_error_response,
    build_success_response,
    handle_errors,
)
from shared_utils import MASK64, configure_logging, write_output
from subset_bp import DecodeStatus, decode

logger = logging.getLogger(__name__)

# ============================================================================
# OUTPUT HELPERS
# ============================================================================

def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()

def _num(x) -> str:
    if x is None:
        return ''
    if isinstance(x, int):
        return str(x)
    return format(float(x), '.10g')

def _emit(args, command: str, data, csv_body: Callable[[], str]) -> None:
    text = build_success_response(data, command=command) if args.format == 'json' else csv_body()
    write_output(text, args.out)

def _params(args) -> CodeParams:
    return CodeParams(args.q, args.dv, args.dc)

# ============================================================================
# SUBCOMMANDS
# ============================================================================

@handle_errors()
def cmd_tables(args) -> int:
    if args.node == 'variable':
        if args.dv is None:
            raise ValidationError("--node variable needs --dv")
        table = de.build_variable_table(args.q, args.dv)
    else:
        if args.dc is None:
            raise ValidationError("--node constraint needs --dc")
        table = de.build_constraint_table(args.q, args.dc, args.average_orderings)
    _emit(args, 'tables', de.table_to_dict(table), lambda: de.table_to_csv(table))
    return EXIT_OK

@handle_errors()
def cmd_threshold(args) -> int:
    result = de.find_threshold(_params(args), precision=args.precision,
                               max_iters=args.max_iters, tol=args.tol)
    data = {**result.to_dict(), 'theta': round(result.theta, 5)}
    columns = ['q', 'dv', 'dc', 'theta', 'lower', 'upper', 'steps']
    _emit(args, 'threshold', data,
          lambda: _csv_text(columns, [[_num(data[c]) for c in columns]]))
    return EXIT_OK

@handle_errors()
def cmd_de(args) -> int:
    trace = de.de_iterate(_params(args), args.delta, max_iters=args.max_iters, tol=args.tol)
    _emit(args, 'de', de.trace_to_dict(trace), lambda: de.trace_to_csv(trace))
    return EXIT_OK

@handle_errors()
def cmd_rate(args) -> int:
    estimate = de.rate_estimate(_params(args), args.k)
    data = estimate.to_dict()
    columns = ['q', 'dv', 'dc', 'k', 'r_k', 'r_limit']
    _emit(args, 'rate', data, lambda: _csv_text(columns, [[_num(data[c]) for c in columns]]))
    return EXIT_OK

def _deltas(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ValidationError("--deltas must be a comma-separated list of numbers", details={'deltas': text})

@handle_errors()
def cmd_sim(args) -> int:
    config = simulator.SimConfig(
        params=_params(args),
        n_vars=args.n,
        delta_grid=tuple(_deltas(args.deltas)),
        trials=args.trials,
        seed=args.seed,
        max_iters=args.max_iters,
        workers=args.workers,
        progress=args.progress,
    )
    stats = simulator.run_campaign(config)
    if args.format == 'json':
        write_output(build_success_response(stats.to_dict(), command='sim'), args.out)
    else:
        simulator.write_csv(stats, args.out)
    return EXIT_OK

def _read_grid_file(path: str) -> str:
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            return fh.read()
    except OSError as e:
        raise ValidationError("Cannot read grid file", details={'path': path, 'error': str(e)})

@handle_errors()
def cmd_sudoku_solve(args) -> int:
    graph = build_classic_sudoku(args.box_rows, args.box_cols)
    q = graph.params.q
    received = parse_grid(_read_grid_file(args.grid_file), q)
    check_givens(graph, received)
    result = decode(graph, received, max_iters=args.max_iters)
    if result.status is DecodeStatus.CONTRADICTION:
        raise SudokuCodeError("Decoder reached a contradiction",
                              details={'variable': result.contradiction_variable,
                                       'iterations': result.iterations})
    posteriors = result.posteriors
    values = result.decoded_symbols()
    stalled = result.status is not DecodeStatus.SOLVED
    data = {
        'status': result.status.value,
        'iterations': result.iterations,
        'grid': format_grid(values, q).split('\n'),
    }
    if stalled:
        data['unresolved'] = result.unresolved_count()
        data['candidates'] = format_candidates(posteriors, q).split('\n')

    def body() -> str:
        cells = ' '.join(''.join(symbol_char(v) for v in s.values()) for s in posteriors) if stalled else ''
        return _csv_text(['status', 'iterations', 'grid', 'candidates'],
                         [[data['status'], result.iterations, format_grid(values, q, line_breaks=False), cells]])

    _emit(args, 'sudoku solve', data, body)
    return EXIT_OK

@handle_errors()
def cmd_sudoku_sample(args) -> int:
    graph = build_classic_sudoku(args.box_rows, args.box_cols)
    cw = sample_codeword(graph, args.seed)
    q = graph.params.q
    data = {'box_rows': args.box_rows, 'box_cols': args.box_cols, 'seed': args.seed,
            'grid': format_grid(cw.symbols, q).split('\n')}
    _emit(args, 'sudoku sample', data,
          lambda: _csv_text(['box_rows', 'box_cols', 'seed', 'grid'],
                            [[args.box_rows, args.box_cols, args.seed,
                              format_grid(cw.symbols, q, line_breaks=False)]]))
    return EXIT_OK

@handle_errors()
def cmd_graph(args) -> int:
    if args.planted:
        graph, cw = build_planted(_params(args), args.n, args.seed)
        data = {**graph.to_dict(), 'codeword': cw.symbols.tolist()}
    else:
        graph = build_regular(_params(args), args.n, args.seed)
        data = graph.to_dict()
    _emit(args, 'graph', data,
          lambda: _csv_text(['var', 'con'], [[v, c] for v, c, _, _ in graph.edges]))
    return EXIT_OK

@handle_errors()
def cmd_report(args) -> int:
    rows = de.threshold_report(precision=args.precision)
    columns = ['q', 'dv', 'dc', 'theta', 'lower', 'upper', 'rate']
    for row in rows:
        row['theta'] = round(row['theta'], 5)
        row['rate'] = round(row['rate'], 4)
    _emit(args, 'report', rows, lambda: _csv_text(columns, [[_num(r[c]) for c in columns] for r in rows]))
    return EXIT_OK

# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--format', choices=['csv', 'json'], default='csv')
    common.add_argument('--seed', type=_seed, default=0)
    common.add_argument('--out', default=None, help="file path, '-' for stdout, or s3://bucket/key")
    common.add_argument('--verbose', action='store_true', help="log at DEBUG level on stderr")
    return common

def _code_flags(parser: argparse.ArgumentParser, dv_default: Optional[int] = None) -> None:
    parser.add_argument('--q', type=int, required=True)
    parser.add_argument('--dv', type=int, default=dv_default, required=dv_default is None)
    parser.add_argument('--dc', type=int, required=True)

def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog='sudoku-codes',
                                     description="SUDOKU-constraint codes on the q-ary erasure channel")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('tables', parents=[common], help="exact node kernels")
    p.add_argument('--q', type=int, required=True)
    p.add_argument('--node', choices=['variable', 'constraint'], required=True)
    p.add_argument('--dv', type=int)
    p.add_argument('--dc', type=int)
    p.add_argument('--average-orderings', action='store_true')
    p.set_defaults(handler=cmd_tables)

    p = sub.add_parser('threshold', parents=[common], help="density evolution threshold")
    _code_flags(p)
    p.add_argument('--precision', type=float)
    p.add_argument('--max-iters', type=int)
    p.add_argument('--tol', type=float)
    p.set_defaults(handler=cmd_threshold)

    p = sub.add_parser('de', parents=[common], help="density evolution trace")
    _code_flags(p)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--max-iters', type=int)
    p.add_argument('--tol', type=float)
    p.set_defaults(handler=cmd_de)

    p = sub.add_parser('rate', parents=[common], help="conjectured rate")
    _code_flags(p, dv_default=3)
    p.add_argument('--k', type=int)
    p.set_defaults(handler=cmd_rate)

    p = sub.add_parser('sim', parents=[common], help="Monte Carlo campaign")
    _code_flags(p)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--deltas', required=True, help="comma-separated erasure probabilities")
    p.add_argument('--trials', type=int, default=100)
    p.add_argument('--max-iters', type=int)
    p.add_argument('--workers', type=int, default=1)
    p.add_argument('--progress', action='store_true')
    p.set_defaults(handler=cmd_sim)

    p = sub.add_parser('sudoku', help="classic Sudoku grids")
    sudoku = p.add_subparsers(dest='sudoku_command', required=True)
    s = sudoku.add_parser('solve', parents=[common])
    s.add_argument('grid_file')
    s.add_argument('--box-rows', type=int, default=3)
    s.add_argument('--box-cols', type=int, default=3)
    s.add_argument('--max-iters', type=int)
    s.set_defaults(handler=cmd_sudoku_solve)
    s = sudoku.add_parser('sample', parents=[common])
    s.add_argument('--box-rows', type=int, default=3)
    s.add_argument('--box-cols', type=int, default=3)
    s.set_defaults(handler=cmd_sudoku_sample)

    p = sub.add_parser('graph', parents=[common], help="random regular graph")
    _code_flags(p)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--planted', action='store_true',
                   help="wire the graph around a random balanced codeword (JSON adds it)")
    p.set_defaults(handler=cmd_graph)

    p = sub.add_parser('report', parents=[common], help="threshold vs. rate table")
    p.add_argument('--precision', type=float)
    p.set_defaults(handler=cmd_report)
    return parser

# ============================================================================
# ENTRY POINT
# ============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        configure_logging('DEBUG' if args.verbose else config_manager.get_setting('log_level'))
        logger.debug("Running %s", args.command)
        return args.handler(args)
    except Exception as e:
        code, body = build_error_response(e)
        sys.stderr.write(body + '\n')
        return code

if __name__ == '__main__':
    sys.exit(main())
