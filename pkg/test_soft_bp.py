import random
from itertools import permutations, product

import numpy as np
import pytest

from core_model import SymbolSet
from error_handler import ContradictionError, InfeasibleConstraintError, ValidationError
from soft_bp import (
    _permanent_expansion,
    _permanent_ryser,
    channel_posterior,
    constraint_output_matrix,
    injective_permanent,
    permanent,
    soft_constraint_update,
    soft_variable_update,
    support_of,
    uniform_over,
)
from subset_bp import constraint_update, sdr_feasible, variable_update


def S(*values, q=3):
    return SymbolSet.from_values(values, q)


def soft_constraint_support(inputs, q):
    rows = [uniform_over(s) for s in inputs] + [np.full(q, 1.0 / q)]
    return support_of(soft_constraint_update(np.vstack(rows), len(inputs)))


# ============================================================================
# PERMANENTS
# ============================================================================

def test_permanent_examples():
    assert permanent([[1, 2], [3, 4]]) == pytest.approx(10.0)
    assert permanent(np.eye(3)) == pytest.approx(1.0)
    assert permanent(np.ones((3, 3))) == pytest.approx(6.0)
    assert permanent(np.ones((5, 5))) == pytest.approx(120.0)
    assert permanent([[7.5]]) == pytest.approx(7.5)


def test_permanent_rejects_non_square():
    with pytest.raises(ValidationError):
        permanent(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        permanent(np.ones((0, 0)))


def test_permanent_with_zero_row_vanishes():
    m = np.random.default_rng(1).random((5, 5))
    m[2] = 0.0
    assert permanent(m) == pytest.approx(0.0, abs=1e-12)


def test_injective_permanent_counts_assignments():
    assert injective_permanent(np.ones((2, 3))) == pytest.approx(6.0)
    assert injective_permanent(np.ones((2, 5))) == pytest.approx(20.0)
    assert injective_permanent(np.ones((3, 6))) == pytest.approx(120.0)
    assert injective_permanent(np.zeros((0, 4))) == 1.0
    with pytest.raises(ValidationError):
        injective_permanent(np.ones((3, 2)))


def test_permanent_invariant_under_row_and_column_shuffles():
    rng = np.random.default_rng(7)
    m = rng.random((5, 5))
    reference = permanent(m)
    for _ in range(20):
        rows = rng.permutation(5)
        cols = rng.permutation(5)
        assert permanent(m[rows][:, cols]) == pytest.approx(reference, rel=1e-10)
        assert permanent(m.T) == pytest.approx(reference, rel=1e-10)


@pytest.mark.parametrize("shape", [(6, 6), (4, 6), (3, 5)])
def test_ryser_agrees_with_expansion(shape):
    rng = np.random.default_rng(shape[0] * 10 + shape[1])
    m = rng.random(shape)
    assert _permanent_ryser(m) == pytest.approx(_permanent_expansion(m), rel=1e-9)


# ============================================================================
# MESSAGES
# ============================================================================

def test_channel_posterior():
    np.testing.assert_allclose(channel_posterior(0, 4), [0.25] * 4)
    np.testing.assert_allclose(channel_posterior(2, 3), [0, 1, 0])


def test_uniform_over_empty_set_rejected():
    with pytest.raises(ValidationError):
        uniform_over(SymbolSet.empty(3))


def test_support_of_examples():
    assert support_of([0.5, 0.0, 0.5]) == S(1, 3)
    assert support_of([1e-15, 1.0, 0.0]) == S(2)
    assert support_of([1e-15, 1.0, 0.0], tol=0.0) == S(1, 2)
    with pytest.raises(ValidationError):
        support_of([0.5, 0.5, 0.0], tol=-1.0)


# ============================================================================
# NODE RULES
# ============================================================================

def test_soft_variable_update_example():
    out = soft_variable_update(np.full(3, 1 / 3), [[0.5, 0.5, 0.0], [0.2, 0.4, 0.4]])
    np.testing.assert_allclose(out, [1 / 3, 2 / 3, 0.0])


def test_soft_variable_update_contradiction():
    with pytest.raises(ContradictionError):
        soft_variable_update([1.0, 0.0, 0.0], [[0.0, 1.0, 0.0]])
    with pytest.raises(ValidationError):
        soft_variable_update([0.5, 0.5], [[0.2, 0.3, 0.5]])


def test_soft_constraint_update_uniform():
    p = np.full((3, 3), 1 / 3)
    np.testing.assert_allclose(soft_constraint_update(p, 0), [1 / 3] * 3)


def test_soft_constraint_update_forced_value():
    p = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_allclose(soft_constraint_update(p, 2), [1.0, 0.0, 0.0])


def test_soft_constraint_update_naked_pair():
    p = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_allclose(soft_constraint_update(p, 2), [0.0, 0.0, 1.0], atol=1e-12)


def test_soft_constraint_update_weights():
    p = np.array([[0.6, 0.4, 0.0], [0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_allclose(soft_constraint_update(p, 2), np.array([0.2, 0.3, 0.26]) / 0.76)


def test_soft_constraint_update_is_not_uniform_on_its_support():
    p = np.vstack([np.full(3, 1 / 3), uniform_over(S(1, 2)), uniform_over(S(1, 2, 3))])
    np.testing.assert_allclose(soft_constraint_update(p, 0), [0.25, 0.25, 0.5])


def test_soft_variable_update_support_intersection():
    out = soft_variable_update(np.full(4, 0.25), [uniform_over(S(1, 2, q=4)), uniform_over(S(1, 3, q=4))])
    np.testing.assert_allclose(out, [1, 0, 0, 0])
    out = soft_variable_update(channel_posterior(3, 4), [[0.1, 0.2, 0.3, 0.4]])
    np.testing.assert_allclose(out, [0, 0, 1, 0])


def test_soft_constraint_update_infeasible():
    p = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]])
    with pytest.raises(InfeasibleConstraintError):
        soft_constraint_update(p, 2)
    with pytest.raises(ValidationError):
        soft_constraint_update(p, 3)
    with pytest.raises(ValidationError):
        soft_constraint_update(np.full((4, 3), 1 / 3), 0)


@pytest.mark.parametrize("q", [3, 4, 5])
def test_output_matrix_is_doubly_stochastic(q):
    rng = np.random.default_rng(q)
    for _ in range(1000):
        p = rng.random((q, q))
        p /= p.sum(axis=1, keepdims=True)
        out = constraint_output_matrix(p)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-10)


def test_output_matrix_rows_match_single_edge_rule():
    p = np.random.default_rng(3).random((3, 5))
    out = constraint_output_matrix(p)
    for i in range(3):
        np.testing.assert_allclose(out[i], soft_constraint_update(p, i), rtol=1e-9)


# ============================================================================
# AGREEMENT WITH THE SUBSET RULES
# ============================================================================

@pytest.mark.parametrize("q,d_c", [(q, d_c) for q in range(2, 5) for d_c in range(2, q + 1)])
def test_constraint_support_matches_subset_rule_exhaustive(q, d_c):
    sets = [SymbolSet(m, q) for m in range(1, 1 << q)]
    for inputs in product(sets, repeat=d_c - 1):
        if not sdr_feasible(inputs, 0):
            continue
        assert soft_constraint_support(inputs, q) == constraint_update(list(inputs), q), inputs


def test_constraint_support_matches_subset_rule_random():
    q = 5
    rng = random.Random(55)
    for _ in range(10_000):
        d_c = rng.randint(2, q)
        truths = rng.sample(range(1, q + 1), d_c - 1)
        inputs = [SymbolSet.from_values([t] + [v for v in range(1, q + 1) if rng.random() < 0.4], q)
                  for t in truths]
        assert soft_constraint_support(inputs, q) == constraint_update(inputs, q), inputs


def test_variable_support_matches_subset_rule():
    q = 4
    sets = [SymbolSet(m, q) for m in range(1, 1 << q)]
    for channel, a, b in product(sets, repeat=3):
        expected = variable_update(channel, [a, b])
        if expected.is_empty():
            continue
        out = soft_variable_update(uniform_over(channel), [uniform_over(a), uniform_over(b)])
        assert support_of(out) == expected


def test_soft_constraint_ignores_input_order():
    rng = np.random.default_rng(11)
    p = rng.random((4, 4))
    reference = soft_constraint_update(p, 3)
    for order in permutations(range(3)):
        shuffled = np.vstack([p[list(order)], p[3]])
        np.testing.assert_allclose(soft_constraint_update(shuffled, 3), reference, rtol=1e-10)


def test_soft_constraint_is_alphabet_equivariant():
    rng = np.random.default_rng(12)
    p = rng.random((3, 4))
    reference = soft_constraint_update(p, 0)
    for cols in permutations(range(4)):
        cols = list(cols)
        np.testing.assert_allclose(soft_constraint_update(p[:, cols], 0), reference[cols], rtol=1e-10)
