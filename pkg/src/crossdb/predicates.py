"""Predicate expression trees and document path resolution.

A predicate is a boolean tree over comparisons of column references,
document path references, and literals. Evaluation is total: Null
operands and type mismatches collapse to False instead of raising.
Name resolution happens once, at plan time, never per row.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import SchemaError
from .model import DOC_COLUMN, K_DOCUMENTS, compare_op

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")

NEGATED = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<", ">=": "<="}
FLIPPED = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class ColumnRef:
    """`qualifier.name` plus an optional document path below the column.

    A ref with name=None addresses the whole record's single document
    column (document collections) and must carry a path. After binding,
    `side` (0=left, 1=right record) and `index` are filled in.
    """

    qualifier: str | None
    name: str | None
    path: tuple = ()
    side: int | None = None
    index: int | None = None


@dataclass(frozen=True)
class Literal:
    value: object


@dataclass(frozen=True)
class Comparison:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    child: object


def resolve_path(doc, path):
    """Walk key/index steps into a document; missing steps yield None."""
    cur = doc
    for step in path:
        if isinstance(step, int) and not isinstance(step, bool):
            if isinstance(cur, list) and 0 <= step < len(cur):
                cur = cur[step]
            else:
                return None
        else:
            if isinstance(cur, dict) and step in cur:
                cur = cur[step]
            else:
                return None
    return cur


def walk_refs(expr):
    """Yield every ColumnRef in an expression tree."""
    if isinstance(expr, ColumnRef):
        yield expr
    elif isinstance(expr, Comparison):
        yield from walk_refs(expr.left)
        yield from walk_refs(expr.right)
    elif isinstance(expr, (And, Or)):
        for p in expr.parts:
            yield from walk_refs(p)
    elif isinstance(expr, Not):
        yield from walk_refs(expr.child)


def referenced_qualifiers(expr):
    return {r.qualifier for r in walk_refs(expr) if r.qualifier is not None}


def map_refs(expr, fn):
    """Rebuild an expression tree with fn applied to every ColumnRef."""
    if isinstance(expr, ColumnRef):
        return fn(expr)
    if isinstance(expr, Literal):
        return expr
    if isinstance(expr, Comparison):
        return Comparison(expr.op, map_refs(expr.left, fn), map_refs(expr.right, fn))
    if isinstance(expr, And):
        return And(tuple(map_refs(p, fn) for p in expr.parts))
    if isinstance(expr, Or):
        return Or(tuple(map_refs(p, fn) for p in expr.parts))
    if isinstance(expr, Not):
        return Not(map_refs(expr.child, fn))
    raise SchemaError(f"not an expression node: {expr!r}")


def bind_to_schema(expr, schema, side=0):
    """Resolve every ref against one schema; unresolvable names raise here."""

    def bind(ref):
        name = ref.name
        if name is None:
            if schema.kind != K_DOCUMENTS:
                raise SchemaError(
                    f"bare path reference needs a document collection, not {schema.name}"
                )
            name = DOC_COLUMN
        idx = schema.column_index(name)
        return replace(ref, name=name, side=side, index=idx)

    return map_refs(expr, bind)


def bind_with_resolver(expr, resolver):
    """Resolve refs through a callable (ref) -> (side, index)."""

    def bind(ref):
        side, idx = resolver(ref)
        return replace(ref, side=side, index=idx)

    return map_refs(expr, bind)


def eval_value(expr, left, right=None):
    """Evaluate a scalar expression against one or two records/rows."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, ColumnRef):
        if expr.index is None:
            raise SchemaError(f"unbound column reference {format_expr(expr)}")
        rec = right if expr.side == 1 else left
        values = rec.values if hasattr(rec, "values") else rec
        v = values[expr.index]
        if expr.path:
            v = resolve_path(v, expr.path)
        return v
    raise SchemaError(f"not a scalar expression: {expr!r}")


def eval_predicate(pred, left, right=None):
    """Total boolean evaluation; never raises on value type mismatches."""
    if pred is None:
        return True
    if isinstance(pred, Comparison):
        return compare_op(pred.op, eval_value(pred.left, left, right), eval_value(pred.right, left, right))
    if isinstance(pred, And):
        return all(eval_predicate(p, left, right) for p in pred.parts)
    if isinstance(pred, Or):
        return any(eval_predicate(p, left, right) for p in pred.parts)
    if isinstance(pred, Not):
        return not eval_predicate(pred.child, left, right)
    raise SchemaError(f"not a predicate node: {pred!r}")


def conjuncts(pred):
    """Flatten top-level ANDs into a list of conjuncts."""
    if pred is None:
        return []
    if isinstance(pred, And):
        out = []
        for p in pred.parts:
            out.extend(conjuncts(p))
        return out
    return [pred]


def conjoin(parts):
    parts = [p for p in parts if p is not None]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


def format_expr(expr):
    """Canonical text form, reused by the query printer and fingerprints."""
    if isinstance(expr, Literal):
        v = expr.value
        if isinstance(v, str):
            escaped = v.replace("'", "''")
            return f"'{escaped}'"
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        return repr(v) if isinstance(v, float) else str(v)
    if isinstance(expr, ColumnRef):
        base = expr.name if expr.qualifier is None else f"{expr.qualifier}.{expr.name}"
        if expr.name is None:
            base = expr.qualifier or ""
        for step in expr.path:
            if isinstance(step, int) and not isinstance(step, bool):
                base += f"->>{step}"
            else:
                base += f"->>'{step}'"
        return base
    if isinstance(expr, Comparison):
        return f"{format_expr(expr.left)} {expr.op} {format_expr(expr.right)}"
    if isinstance(expr, And):
        return " AND ".join(_wrap(p) for p in expr.parts)
    if isinstance(expr, Or):
        return " OR ".join(_wrap(p) for p in expr.parts)
    if isinstance(expr, Not):
        return f"NOT {_wrap(expr.child)}"
    raise SchemaError(f"cannot format {expr!r}")


def _wrap(p):
    text = format_expr(p)
    if isinstance(p, (And, Or)):
        return f"({text})"
    return text
