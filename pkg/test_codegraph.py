import numpy as np
import pytest

from codegraph import (
    ERASURE,
    Codeword,
    FactorGraph,
    ReceivedWord,
    audit_codeword,
    build_classic_sudoku,
    build_planted,
    build_regular,
    check_givens,
    complete_assignment,
    erase,
    format_candidates,
    format_grid,
    parse_grid,
    relabel_codeword,
    sample_codeword,
)
from core_model import CodeParams, SymbolSet
from error_handler import ContradictionError, GraphConstructionError, ValidationError


def assert_graph_invariants(graph: FactorGraph):
    d_v, d_c = graph.params.d_v, graph.params.d_c
    assert graph.n_vars * d_v == graph.n_cons * d_c == graph.n_edges
    assert np.all(np.bincount(graph.edge_var, minlength=graph.n_vars) == d_v)
    assert np.all(np.bincount(graph.edge_con, minlength=graph.n_cons) == d_c)
    for c in range(graph.n_cons):
        members = graph.constraint_variables(c)
        assert len(set(members)) == d_c


# ============================================================================
# GRAPH BUILDERS
# ============================================================================

def test_build_regular_small():
    graph = build_regular(CodeParams(4, 3, 4), 4, seed=11)
    assert graph.n_cons == 3
    assert graph.n_edges == 12
    assert_graph_invariants(graph)


def test_build_regular_large():
    graph = build_regular(CodeParams(3, 3, 3), 300, seed=5)
    assert graph.n_cons == 300
    assert graph.n_edges == 900
    assert_graph_invariants(graph)


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_build_regular_is_deterministic(seed):
    params = CodeParams(4, 3, 4)
    a = build_regular(params, 120, seed)
    b = build_regular(params, 120, seed)
    assert a.edges == b.edges
    assert a.seed == seed


def test_build_regular_seeds_differ():
    params = CodeParams(4, 3, 4)
    assert build_regular(params, 120, 1).edges != build_regular(params, 120, 2).edges


def test_build_regular_divisibility():
    with pytest.raises(ValidationError):
        build_regular(CodeParams(4, 3, 4), 5, seed=0)


def test_build_regular_gives_up_on_dense_graphs():
    # two variables cannot fill a degree-4 constraint without repeats
    with pytest.raises(GraphConstructionError):
        build_regular(CodeParams(4, 2, 4), 2, seed=0, max_attempts=5)


@pytest.mark.parametrize("params,n_vars", [
    (CodeParams(4, 3, 4), 120),
    (CodeParams(4, 3, 4), 1200),
    (CodeParams(6, 3, 6), 60),
    (CodeParams(5, 2, 4), 10),
    (CodeParams(3, 3, 3), 3),
])
def test_build_planted_codeword_is_valid(params, n_vars):
    graph, cw = build_planted(params, n_vars, seed=5)
    assert_graph_invariants(graph)
    assert len(cw) == n_vars
    assert audit_codeword(graph, cw.symbols) == []
    assert np.all(np.bincount(cw.symbols, minlength=params.q + 1)[1:] == n_vars // params.q)


def test_build_planted_is_deterministic():
    params = CodeParams(4, 3, 4)
    graph_a, cw_a = build_planted(params, 120, seed=31)
    graph_b, cw_b = build_planted(params, 120, seed=31)
    assert graph_a.edges == graph_b.edges
    np.testing.assert_array_equal(cw_a.symbols, cw_b.symbols)
    graph_c, _ = build_planted(params, 120, seed=32)
    assert graph_a.edges != graph_c.edges


@pytest.mark.parametrize("n_vars", [6, 121])
def test_build_planted_divisibility(n_vars):
    with pytest.raises(ValidationError):
        build_planted(CodeParams(4, 3, 4), n_vars, seed=0)


def test_relabel_codeword():
    graph, cw = build_planted(CodeParams(4, 3, 4), 120, seed=8)
    seen = set()
    for seed in range(10):
        other = relabel_codeword(cw, seed)
        assert audit_codeword(graph, other.symbols) == []
        # a relabeling is a bijection applied symbolwise
        pairs = set(zip(cw.symbols.tolist(), other.symbols.tolist()))
        assert len(pairs) == 4
        seen.add(tuple(other.symbols.tolist()))
    assert len(seen) > 1
    np.testing.assert_array_equal(relabel_codeword(cw, 3).symbols, relabel_codeword(cw, 3).symbols)


def test_graph_rejects_repeated_variable_in_constraint():
    with pytest.raises(GraphConstructionError):
        FactorGraph.from_dict({'q': 2, 'dv': 2, 'dc': 2, 'n_vars': 2, 'n_cons': 2,
                               'edges': [[0, 0], [0, 0], [1, 1], [1, 1]], 'seed': None})


def test_graph_json_roundtrip():
    graph = build_regular(CodeParams(4, 3, 4), 12, seed=3)
    restored = FactorGraph.from_json(graph.to_json())
    assert restored.edges == graph.edges
    assert restored.params == graph.params
    assert restored.seed == 3
    np.testing.assert_array_equal(restored.con_edges, graph.con_edges)


def test_graph_document_validation():
    with pytest.raises(ValidationError):
        FactorGraph.from_json('{not json')
    with pytest.raises(ValidationError):
        FactorGraph.from_dict({'q': 4})


@pytest.mark.parametrize("box_rows,box_cols,q", [(3, 3, 9), (2, 2, 4), (2, 3, 6)])
def test_classic_sudoku_shapes(box_rows, box_cols, q):
    graph = build_classic_sudoku(box_rows, box_cols)
    assert graph.params == CodeParams(q, 3, q)
    assert graph.n_vars == q * q
    assert graph.n_cons == 3 * q
    assert_graph_invariants(graph)


def test_classic_sudoku_constraint_layout():
    graph = build_classic_sudoku(3, 3)
    assert graph.constraint_variables(0) == list(range(9))
    assert graph.constraint_variables(9) == list(range(0, 81, 9))
    assert graph.constraint_variables(18) == [0, 1, 2, 9, 10, 11, 18, 19, 20]
    assert graph.constraint_variables(26) == [60, 61, 62, 69, 70, 71, 78, 79, 80]


def test_classic_sudoku_needs_real_boxes():
    with pytest.raises(ValidationError):
        build_classic_sudoku(1, 4)


# ============================================================================
# CODEWORDS
# ============================================================================

@pytest.mark.parametrize("box_rows,box_cols", [(2, 2), (3, 3), (2, 3)])
def test_sample_codeword_classic(box_rows, box_cols):
    graph = build_classic_sudoku(box_rows, box_cols)
    cw = sample_codeword(graph, seed=4)
    assert len(cw) == graph.n_vars
    assert audit_codeword(graph, cw.symbols) == []


def test_sample_codeword_ring():
    graph = build_regular(CodeParams(3, 3, 3), 3, seed=1)
    cw = sample_codeword(graph, seed=1)
    assert sorted(cw.symbols.tolist()) == [1, 2, 3]
    assert audit_codeword(graph, cw.symbols) == []


def test_sample_codeword_planted_graph():
    graph, _ = build_planted(CodeParams(4, 3, 4), 24, seed=9)
    cw = sample_codeword(graph, seed=2)
    assert audit_codeword(graph, cw.symbols) == []


def test_sample_codeword_is_deterministic():
    graph = build_classic_sudoku(3, 3)
    a = sample_codeword(graph, seed=77)
    b = sample_codeword(graph, seed=77)
    np.testing.assert_array_equal(a.symbols, b.symbols)


def test_audit_flags_bad_constraints():
    graph = build_classic_sudoku(2, 2)
    cw = sample_codeword(graph, seed=0)
    broken = cw.symbols.copy()
    broken[0] = broken[1]
    bad = audit_codeword(graph, broken)
    assert 0 in bad


def test_complete_assignment_respects_givens(easy_puzzle):
    graph = build_classic_sudoku(3, 3)
    received = parse_grid(easy_puzzle, 9)
    cw = complete_assignment(graph, received)
    assert audit_codeword(graph, cw.symbols) == []
    given = ~received.erased
    np.testing.assert_array_equal(cw.symbols[given], received.observations[given])


def test_check_givens_detects_duplicates():
    graph = build_classic_sudoku(3, 3)
    text = '11' + '.' * 79
    with pytest.raises(ContradictionError):
        check_givens(graph, parse_grid(text, 9))


# ============================================================================
# ERASURE CHANNEL
# ============================================================================

def test_erase_extremes():
    cw = Codeword(np.arange(100) % 4 + 1, 4)
    kept = erase(cw, 0.0, seed=1)
    np.testing.assert_array_equal(kept.observations, cw.symbols)
    gone = erase(cw, 1.0, seed=1)
    assert np.all(gone.observations == ERASURE)


def test_erase_fraction_concentrates():
    cw = Codeword(np.ones(100_000, dtype=np.int64), 4)
    received = erase(cw, 0.5, seed=12345)
    assert abs(received.erasure_fraction() - 0.5) < 0.01
    kept = ~received.erased
    assert np.all(received.observations[kept] == 1)


def test_erase_is_deterministic():
    cw = Codeword(np.arange(500) % 4 + 1, 4)
    a = erase(cw, 0.3, seed=8)
    b = erase(cw, 0.3, seed=8)
    np.testing.assert_array_equal(a.observations, b.observations)


@pytest.mark.parametrize("delta", [-0.1, 1.5])
def test_erase_rejects_bad_probability(delta):
    with pytest.raises(ValidationError):
        erase(Codeword([1, 2], 4), delta, seed=0)


def test_channel_masks():
    received = ReceivedWord([0, 1, 4], 4)
    assert received.channel_masks().tolist() == [0b1111, 0b0001, 0b1000]


def test_received_word_validation():
    with pytest.raises(ValidationError):
        ReceivedWord([5], 4)


# ============================================================================
# GRID TEXT
# ============================================================================

def test_parse_and_format_grid(easy_puzzle):
    received = parse_grid(easy_puzzle, 9)
    assert len(received) == 81
    assert received.observations[2] == 3
    assert received.observations[0] == ERASURE
    assert format_grid(received.observations, 9).split('\n')[0] == '..3.2.6..'


def test_parse_grid_letters_and_whitespace():
    received = parse_grid(" 12..\n..34 \n\t....\n....", 4)
    assert received.observations[:8].tolist() == [1, 2, 0, 0, 0, 0, 3, 4]
    big = parse_grid("A" + "." * 254 + "g", 16)
    assert big.observations[0] == 10
    assert big.observations[-1] == 16
    with pytest.raises(ValidationError):
        parse_grid("a" + "." * 15, 4)


@pytest.mark.parametrize("text", ['1' * 80, '1' * 80 + 'x', '1' * 82])
def test_parse_grid_rejects_malformed(text):
    with pytest.raises(ValidationError):
        parse_grid(text, 9)


def test_format_candidates():
    posteriors = [SymbolSet.from_values([1, 2], 2), SymbolSet.singleton(2, 2),
                  SymbolSet.singleton(1, 2), SymbolSet.from_values([1, 2], 2)]
    assert format_candidates(posteriors, 2) == '12 2\n1  12'
