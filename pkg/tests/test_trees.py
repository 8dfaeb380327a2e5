import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from pgusgp.errors import ParameterError
from pgusgp.primitives import ARITY, N_TERMINALS, NAME_TO_ID, PRIMITIVE_NAMES
from pgusgp.trees import (
    SCORE_SENTINEL,
    evaluate_tree,
    format_sexpr,
    full_tree,
    grow_tree,
    node_depths,
    parse_sexpr,
    subtree_span,
    tree_depth,
    validate_code,
)

from conftest import fv, make_individual


FIG_TREE = "(+ (max ALT AUT) (/ RTN CTN))"


def test_hand_evaluated_example_tree():
    # max(5, 3) + 4/2 = 7, checked by hand
    ind = make_individual(FIG_TREE)
    assert evaluate_tree(ind, fv(ALT=5, AUT=3, RTN=4, CTN=2)) == 7.0


def test_protected_division_zero_denominator():
    ind = make_individual("(/ RTN CTN)")
    assert evaluate_tree(ind, fv(RTN=4, CTN=0)) == 1.0
    assert evaluate_tree(ind, fv(RTN=4, CTN=2)) == 2.0


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_protected_division_total(a):
    ind = make_individual("(/ TT CTN)")
    assert evaluate_tree(ind, fv(TT=a, CTN=0)) == 1.0


def test_if_else_branch_semantics():
    ind = make_individual("(if_else OT RTN CTN)")
    assert evaluate_tree(ind, fv(OT=0, RTN=9, CTN=4)) == 4.0
    assert evaluate_tree(ind, fv(OT=1, RTN=9, CTN=4)) == 9.0
    assert evaluate_tree(ind, fv(OT=-2.5, RTN=9, CTN=4)) == 9.0


@given(st.floats(allow_nan=False, allow_infinity=False),
       st.floats(allow_nan=False, allow_infinity=False))
def test_comparisons_return_truth_values(a, b):
    le = make_individual("(<= TT RTN)")
    ge = make_individual("(>= TT RTN)")
    features = fv(TT=a, RTN=b)
    assert evaluate_tree(le, features) == (1.0 if a <= b else 0.0)
    assert evaluate_tree(ge, features) == (1.0 if a >= b else 0.0)


def test_boolean_functions_nonzero_truth():
    and_tree = make_individual("(& TT RTN)")
    or_tree = make_individual("(| TT RTN)")
    assert evaluate_tree(and_tree, fv(TT=2.0, RTN=-3.0)) == 1.0
    assert evaluate_tree(and_tree, fv(TT=2.0, RTN=0.0)) == 0.0
    assert evaluate_tree(or_tree, fv(TT=0.0, RTN=0.0)) == 0.0
    assert evaluate_tree(or_tree, fv(TT=0.0, RTN=0.5)) == 1.0


def test_nonfinite_score_clamped_to_sentinel():
    # (TT * TT) overflows for huge inputs -> inf -> sentinel
    ind = make_individual("(* TT TT)")
    assert evaluate_tree(ind, fv(TT=1e200)) == SCORE_SENTINEL
    # inf - inf -> nan -> sentinel
    ind2 = make_individual("(- (* TT TT) (* RTN RTN))")
    assert evaluate_tree(ind2, fv(TT=1e200, RTN=1e200)) == SCORE_SENTINEL


def test_evaluation_purity():
    ind = make_individual(FIG_TREE)
    features = fv(ALT=5.5, AUT=3.25, RTN=7, CTN=3)
    first = evaluate_tree(ind, features)
    assert all(evaluate_tree(ind, features) == first for _ in range(1000))


def test_depth_and_size_conventions():
    assert tree_depth(parse_sexpr("TT")) == 0
    assert tree_depth(parse_sexpr("(+ TT RTN)")) == 1
    assert tree_depth(parse_sexpr(FIG_TREE)) == 2
    ind = make_individual(FIG_TREE)
    assert ind.size == 7
    assert ind.depth == 2


def test_node_depths_prefix_order():
    code = parse_sexpr(FIG_TREE)
    assert node_depths(code) == [0, 1, 2, 2, 1, 2, 2]


def test_subtree_span_extracts_complete_subtrees():
    code = parse_sexpr(FIG_TREE)
    start, end = subtree_span(code, 1)  # the (max ALT AUT) node
    assert format_sexpr(code[start:end]) == "(max ALT AUT)"
    start, end = subtree_span(code, 4)
    assert format_sexpr(code[start:end]) == "(/ RTN CTN)"


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=10**9))
def test_sexpr_roundtrip_random_trees(seed):
    rng = np.random.default_rng(seed)
    code = grow_tree(rng, 0, 6)
    assert parse_sexpr(format_sexpr(code)) == code


@pytest.mark.parametrize("text", [
    "", "(", ")", "(+ TT)", "(+ TT RTN CTN)", "(bogus TT RTN)", "BOGUS",
    "(+ TT RTN) TT", "(max TT", "TT)",
])
def test_parse_rejects_malformed(text):
    with pytest.raises(ParameterError):
        parse_sexpr(text)


def test_validate_code_rejects_fragments():
    plus = NAME_TO_ID["+"]
    tt = NAME_TO_ID["TT"]
    with pytest.raises(ParameterError):
        validate_code((plus, tt))  # missing child
    with pytest.raises(ParameterError):
        validate_code((tt, tt))  # trailing node
    with pytest.raises(ParameterError):
        validate_code(())


@given(st.integers(min_value=0, max_value=10**9), st.integers(min_value=0, max_value=6))
def test_full_tree_reaches_exact_depth(seed, depth):
    rng = np.random.default_rng(seed)
    code = full_tree(rng, depth)
    assert tree_depth(code) == depth
    validate_code(code)


@given(st.integers(min_value=0, max_value=10**9))
def test_grow_tree_respects_bounds(seed):
    rng = np.random.default_rng(seed)
    code = grow_tree(rng, 2, 5)
    assert 2 <= tree_depth(code) <= 5
    validate_code(code)


def test_arities_match_fixed_table():
    assert len(PRIMITIVE_NAMES) == 22
    assert ARITY[NAME_TO_ID["if_else"]] == 3
    assert all(ARITY[i] == 0 for i in range(N_TERMINALS))
    assert all(ARITY[i] in (2, 3) for i in range(N_TERMINALS, 22))
