"""Value comparisons, predicate evaluation, and document paths."""

import copy

import pytest

from crossdb.errors import SchemaError
from crossdb.model import (
    K_RELATION,
    K_VERTEX,
    Record,
    Schema,
    T_DOCUMENT,
    T_FLOAT,
    T_INT,
    T_TEXT,
    compare_op,
    get_edge_key,
    get_vertex_key,
)
from crossdb.predicates import (
    And,
    ColumnRef,
    Comparison,
    Literal,
    Not,
    Or,
    bind_to_schema,
    eval_predicate,
    format_expr,
    resolve_path,
)

PRICE_SCHEMA = Schema("items", 0, K_RELATION, [("price", T_INT), ("title", T_TEXT), ("x", T_INT)])


def pred(op, column, value):
    return Comparison(op, ColumnRef(None, column), Literal(value))


def run(p, values):
    bound = bind_to_schema(p, PRICE_SCHEMA)
    return eval_predicate(bound, Record(0, tuple(values)))


def test_equality_on_identical_values():
    assert run(pred("=", "price", 5), [5, "a", 0]) is True


def test_title_equality_matches_fixture_predicate():
    assert run(pred("=", "title", "Yogurt"), [1, "Yogurt", 0]) is True
    assert run(pred("=", "title", "Yogurt"), [1, "Milk", 0]) is False


def test_null_comparison_collapses_to_false():
    assert run(pred("<", "x", 3), [0, "a", None]) is False
    assert run(pred("=", "x", None), [0, "a", None]) is False
    assert run(pred("!=", "x", 3), [0, "a", None]) is False


def test_type_mismatch_is_false_not_error():
    assert run(pred("<", "title", 3), [0, "a", 0]) is False
    assert run(pred("=", "price", "5"), [5, "a", 0]) is False


def test_int_float_promotion_and_text_order():
    assert compare_op("=", 5, 5.0) is True
    assert compare_op("<", 2, 2.5) is True
    assert compare_op("<", "abc", "abd") is True
    assert compare_op("<", True, 1) is False  # bools never compare with ints


def test_document_equality_only():
    assert compare_op("=", {"a": 1}, {"a": 1}) is True
    assert compare_op("!=", {"a": 1}, {"a": 2}) is True
    assert compare_op("<", {"a": 1}, {"a": 2}) is False
    assert compare_op("=", [1, 2], [1, 2]) is True


def test_boolean_connectives():
    p = And((pred(">", "price", 1), Not(pred("=", "title", "x"))))
    assert run(p, [2, "y", 0]) is True
    q = Or((pred("=", "price", 9), pred("=", "title", "y")))
    assert run(q, [2, "y", 0]) is True


def test_unresolvable_column_fails_at_bind_time():
    with pytest.raises(SchemaError):
        bind_to_schema(pred("=", "missing", 1), PRICE_SCHEMA)


def test_eval_is_pure_and_deterministic():
    p = bind_to_schema(pred("=", "price", 5), PRICE_SCHEMA)
    r = Record(0, (5, "a", 1))
    assert [eval_predicate(p, r) for _ in range(3)] == [True, True, True]


# -- document paths ------------------------------------------------------------


def test_resolve_path_examples():
    assert resolve_path({"customer_id": 7}, ("customer_id",)) == 7
    assert resolve_path({"a": {"b": [10, 20]}}, ("a", "b", 1)) == 20
    assert resolve_path({"a": 1}, ("z",)) is None


def test_resolve_path_index_out_of_range_and_wrong_shape():
    assert resolve_path({"a": [1]}, ("a", 5)) is None
    assert resolve_path({"a": 1}, ("a", "b")) is None
    assert resolve_path({"a": [1, 2]}, ("a", "0")) is None  # text step on an array


def test_resolve_path_does_not_mutate_document():
    doc = {"a": {"b": [10, {"c": 3}]}}
    snapshot = copy.deepcopy(doc)
    resolve_path(doc, ("a", "b", 1, "c"))
    resolve_path(doc, ("missing", "x"))
    assert doc == snapshot


def test_path_through_column_reference():
    schema = Schema("docs", 1, K_RELATION, [("payload", T_DOCUMENT)])
    p = Comparison("=", ColumnRef(None, "payload", path=("k",)), Literal(3))
    bound = bind_to_schema(p, schema)
    assert eval_predicate(bound, Record(0, ({"k": 3},))) is True
    assert eval_predicate(bound, Record(1, ({"k": 4},))) is False
    assert eval_predicate(bound, Record(2, (None,))) is False


# -- vertex/edge keys ------------------------------------------------------------


VS = Schema("V", 3, K_VERTEX, [("vid", T_INT), ("p", T_TEXT)], label="V")
ES = Schema(
    "E",
    2,
    "edge",
    [("soid", T_INT), ("svid", T_INT), ("toid", T_INT), ("tvid", T_INT), ("w", T_FLOAT)],
    label="e",
)


def test_vertex_key_extraction():
    assert get_vertex_key(Record(0, (0, "x")), Schema("V0", 0, K_VERTEX, [("vid", T_INT), ("p", T_TEXT)], label="V")) == (0, 0)
    assert get_vertex_key(Record(9, (5, "x")), VS) == (3, 5)


def test_edge_key_extraction_and_round_trip():
    rec = Record(4, (0, 0, 1, 4, 0.5))
    assert get_edge_key(rec, ES) == (2, 0, 0, 1, 4)
    # the key re-derives from the stored fields
    assert get_edge_key(rec, ES)[1:] == rec.values[:4]


def test_key_kind_mismatch():
    with pytest.raises(SchemaError):
        get_vertex_key(Record(0, (0, 0, 1, 4, 0.5)), ES)
    with pytest.raises(SchemaError):
        get_edge_key(Record(0, (0, "x")), VS)


def test_format_expr_round_trips_through_parser():
    from crossdb.parser import tokenize

    p = And((pred("<=", "price", 5), Or((pred("=", "title", "a'b"), pred("!=", "x", 1)))))
    text = format_expr(p)
    assert "''" in text  # embedded quote escaped
    tokens = tokenize(text)
    assert tokens[-1].kind == "eof"
