"""Per-column statistics and selectivity estimation for the planner."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import T_FLOAT, T_INT, value_kind
from .predicates import ColumnRef, Comparison, And, Or, Not, Literal


@dataclass
class ColumnStat:
    nulls: int = 0
    minimum: object = None
    maximum: object = None
    ndv: int = 0


@dataclass
class ColumnStats:
    """Exact full-scan statistics for one collection (desk-scale NDV)."""

    row_count: int = 0
    columns: dict = field(default_factory=dict)  # column name -> ColumnStat

    def column(self, name):
        return self.columns.get(name)


def collect_stats(collection):
    """One full pass: exact counts, min/max over orderable values, exact NDV."""
    schema = collection.schema
    names = schema.column_names()
    distinct = {n: set() for n in names}
    stats = ColumnStats(columns={n: ColumnStat() for n in names})
    for record in collection.iter_live():
        stats.row_count += 1
        for name, v in zip(names, record.values):
            col = stats.columns[name]
            if v is None:
                col.nulls += 1
                continue
            kind = value_kind(v)
            try:
                distinct[name].add(v if kind not in ("document", "array") else repr(v))
            except TypeError:
                distinct[name].add(repr(v))
            if kind in (T_INT, T_FLOAT, "text", "bool"):
                if col.minimum is None or _lt(v, col.minimum):
                    col.minimum = v
                if col.maximum is None or _lt(col.maximum, v):
                    col.maximum = v
    for name in names:
        stats.columns[name].ndv = len(distinct[name])
    return stats


def _lt(a, b):
    ka, kb = value_kind(a), value_kind(b)
    numeric = (T_INT, T_FLOAT)
    if ka in numeric and kb in numeric:
        return a < b
    if ka != kb:
        return False
    try:
        return a < b
    except TypeError:
        return False


def estimate_selectivity(pred, stats):
    """Fraction of rows expected to pass `pred` under uniformity.

    Equality -> 1/NDV, inequality -> 1 - 1/NDV, ranges by span, AND by
    product (attribute independence), OR by inclusion-exclusion. Missing
    stats fall back to 1.0 (conservative).
    """
    if pred is None:
        return 1.0
    if isinstance(pred, And):
        s = 1.0
        for p in pred.parts:
            s *= estimate_selectivity(p, stats)
        return _clamp(s)
    if isinstance(pred, Or):
        s = 0.0
        for p in pred.parts:
            sp = estimate_selectivity(p, stats)
            s = s + sp - s * sp
        return _clamp(s)
    if isinstance(pred, Not):
        return _clamp(1.0 - estimate_selectivity(pred.child, stats))
    if isinstance(pred, Comparison):
        return _comparison_selectivity(pred, stats)
    return 1.0


def _comparison_selectivity(pred, stats):
    ref, lit, op = _normalize_sides(pred)
    if ref is None or stats is None:
        return 1.0
    if ref.path:
        return 1.0  # no stats below document roots
    col = stats.column(ref.name)
    if col is None or stats.row_count == 0:
        return 1.0
    if op == "=":
        return _clamp(1.0 / col.ndv) if col.ndv > 0 else 1.0
    if op == "!=":
        return _clamp(1.0 - 1.0 / col.ndv) if col.ndv > 0 else 1.0
    lo, hi = col.minimum, col.maximum
    if lo is None or hi is None:
        return 1.0
    if not _numeric(lo) or not _numeric(hi) or not _numeric(lit):
        return 1.0
    span = float(hi) - float(lo)
    if span <= 0.0:
        # single-valued column: the range either takes everything or nothing
        return 1.0 if compare_passes(op, float(lo), float(lit)) else 0.0
    k = float(lit)
    if op in ("<", "<="):
        return _clamp((k - float(lo)) / span)
    if op in (">", ">="):
        return _clamp((float(hi) - k) / span)
    return 1.0


def compare_passes(op, value, bound):
    if op == "<":
        return value < bound
    if op == "<=":
        return value <= bound
    if op == ">":
        return value > bound
    if op == ">=":
        return value >= bound
    return False


def _numeric(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _normalize_sides(pred):
    """Return (column ref, literal value, oriented op) or (None, None, None)."""
    left, right, op = pred.left, pred.right, pred.op
    if isinstance(left, ColumnRef) and isinstance(right, Literal):
        return left, right.value, op
    if isinstance(left, Literal) and isinstance(right, ColumnRef):
        from .predicates import FLIPPED

        return right, left.value, FLIPPED[op]
    return None, None, None


def _clamp(s):
    return min(1.0, max(0.0, s))
