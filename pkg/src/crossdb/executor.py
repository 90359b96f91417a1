"""Physical operators and pull-based plan execution.

Row streams are tuples aligned to each node's `columns` (qualified
names like "C.id"). Pattern matches produce a binding relation that the
graph-scan operator flattens into relational rows, so everything above
a match composes with ordinary relational operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError, ExecutionError, SchemaError
from .graphops import GraphView, OverlayTable, match_by_joins, match_pattern
from .predicates import (
    ColumnRef,
    Comparison,
    bind_with_resolver,
    eval_predicate,
    eval_value,
    format_expr,
    walk_refs,
)


@dataclass
class QueryResult:
    columns: list
    rows: list

    @property
    def row_count(self):
        return len(self.rows)

    def as_multiset(self):
        return sorted(map(_hashable_row, self.rows))


def _hashable(v):
    if isinstance(v, dict):
        return ("{", tuple(sorted((k, _hashable(x)) for k, x in v.items())))
    if isinstance(v, list):
        return ("[", tuple(_hashable(x) for x in v))
    return v


def _hashable_row(row):
    return tuple(_hashable(v) for v in row)


@dataclass
class ExecutionContext:
    db: object
    consts: object
    join_emulation: bool = False  # pattern matching via multi-way joins


def _layout_resolver(columns, side=0):
    index = {name: i for i, name in enumerate(columns)}

    def resolve(ref):
        key = f"{ref.qualifier}.{ref.name}" if ref.qualifier else ref.name
        if key not in index:
            raise SchemaError(f"column {key!r} not in layout {columns}")
        return side, index[key]

    return resolve


def _two_sided_resolver(left_columns, right_columns):
    left = {name: i for i, name in enumerate(left_columns)}
    right = {name: i for i, name in enumerate(right_columns)}

    def resolve(ref):
        key = f"{ref.qualifier}.{ref.name}" if ref.qualifier else ref.name
        if key in left:
            return 0, left[key]
        if key in right:
            return 1, right[key]
        raise SchemaError(f"column {key!r} not in either join input")

    return resolve


class PhysicalNode:
    name = "node"

    def __init__(self):
        self.columns = []
        self.est_rows = 0.0
        self.est_cost = 0.0

    def children(self):
        return []

    def describe(self):
        return self.name

    def iterate(self, ctx):
        raise NotImplementedError


class TableScanNode(PhysicalNode):
    name = "TableScan"

    def __init__(self, alias, collection_name, schema, pred=None):
        super().__init__()
        self.alias = alias
        self.collection_name = collection_name
        self.schema = schema
        self.pred = pred
        self.columns = [f"{alias}.{c}" for c in schema.column_names()]

    def describe(self):
        text = f"TableScan {self.collection_name} AS {self.alias}"
        if self.pred is not None:
            text += f" [{format_expr(self.pred)}]"
        return text

    def iterate(self, ctx):
        coll = ctx.db.collection(self.collection_name)
        for record in coll.scan(self.pred):
            yield record.values


class TidFetchNode(PhysicalNode):
    name = "TidFetch"

    def __init__(self, alias, collection_name, schema, tids):
        super().__init__()
        self.alias = alias
        self.collection_name = collection_name
        self.schema = schema
        self.tids = list(tids)
        self.columns = [f"{alias}.{c}" for c in schema.column_names()]

    def describe(self):
        return f"TidFetch {self.collection_name} [{len(self.tids)} tids]"

    def iterate(self, ctx):
        coll = ctx.db.collection(self.collection_name)
        for tid in self.tids:
            yield coll.fetch(tid).values


class FilterNode(PhysicalNode):
    name = "Filter"

    def __init__(self, child, conjuncts_raw):
        super().__init__()
        self.child = child
        self.columns = list(child.columns)
        self.conjuncts_raw = list(conjuncts_raw)
        resolver = _layout_resolver(child.columns)
        self.bound = [bind_with_resolver(c, resolver) for c in conjuncts_raw]

    def children(self):
        return [self.child]

    def describe(self):
        text = " AND ".join(format_expr(c) for c in self.conjuncts_raw)
        return f"Filter [{text}]"

    def iterate(self, ctx):
        for row in self.child.iterate(ctx):
            if all(eval_predicate(p, row) for p in self.bound):
                yield row


class ProjectNode(PhysicalNode):
    name = "Project"

    def __init__(self, child, items):
        super().__init__()
        self.child = child
        self.items = items
        if items is None:
            self.columns = list(child.columns)
            self.bound = None
        else:
            resolver = _layout_resolver(child.columns)
            self.bound = [bind_with_resolver(i.expr, resolver) for i in items]
            self.columns = [i.output_name() for i in items]

    def children(self):
        return [self.child]

    def describe(self):
        return f"Project [{', '.join(self.columns)}]"

    def iterate(self, ctx):
        if self.bound is None:
            yield from self.child.iterate(ctx)
            return
        for row in self.child.iterate(ctx):
            yield tuple(eval_value(expr, row) for expr in self.bound)


class CrossJoinNode(PhysicalNode):
    """Nested-loop cross-model join with a hash fast path on one equality."""

    name = "CrossJoin"

    def __init__(self, left, right, preds):
        super().__init__()
        self.left = left
        self.right = right
        self.preds_raw = list(preds)
        self.columns = list(left.columns) + list(right.columns)
        resolver = _two_sided_resolver(left.columns, right.columns)
        self.bound = [bind_with_resolver(p, resolver) for p in preds]
        self.hash_key = self._hash_key()

    def _hash_key(self):
        """(left expr, right expr) when a single equality allows hashing."""
        if len(self.bound) != 1:
            return None
        pred = self.bound[0]
        if not isinstance(pred, Comparison) or pred.op != "=":
            return None
        sides = []
        for part in (pred.left, pred.right):
            if not isinstance(part, ColumnRef):
                return None
            sides.append(part)
        if {sides[0].side, sides[1].side} != {0, 1}:
            return None
        if sides[0].side == 0:
            return sides[0], sides[1]
        return sides[1], sides[0]

    def children(self):
        return [self.left, self.right]

    def describe(self):
        algo = "hash" if self.hash_key else "nested"
        text = " AND ".join(format_expr(p) for p in self.preds_raw) or "true"
        return f"CrossJoin {algo} [{text}]"

    def iterate(self, ctx):
        right_rows = list(self.right.iterate(ctx))
        if self.hash_key is not None:
            left_key, right_key = self.hash_key
            pred = self.bound[0]
            table = {}
            odd = []  # rows whose key is unhashable (document/array values)
            for row in right_rows:
                v = eval_value(right_key, None, row)
                if v is None:
                    continue  # Null never joins
                if isinstance(v, (dict, list)):
                    odd.append(row)
                else:
                    table.setdefault(_norm_key(v), []).append(row)
            for lrow in self.left.iterate(ctx):
                v = eval_value(left_key, lrow)
                if v is None:
                    continue
                if isinstance(v, (dict, list)):
                    for rrow in right_rows:
                        if eval_predicate(pred, lrow, rrow):
                            yield tuple(lrow) + tuple(rrow)
                    continue
                for rrow in table.get(_norm_key(v), ()):
                    yield tuple(lrow) + tuple(rrow)
                for rrow in odd:
                    if eval_predicate(pred, lrow, rrow):
                        yield tuple(lrow) + tuple(rrow)
            return
        for lrow in self.left.iterate(ctx):
            for rrow in right_rows:
                if all(eval_predicate(p, lrow, rrow) for p in self.bound):
                    yield tuple(lrow) + tuple(rrow)


def _norm_key(v):
    # int/float equality must hash alike (5 == 5.0)
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, (int, float)):
        return ("n", float(v))
    return ("s", v)


class GraphSourceNode(PhysicalNode):
    """Leaf marking the graph a match consumes; carries no rows itself."""

    name = "Graph"

    def __init__(self, graph_name):
        super().__init__()
        self.graph_name = graph_name

    def describe(self):
        return f"Graph {self.graph_name}"

    def iterate(self, ctx):
        raise ContractError("a graph source is consumed by PatternMatch, not pulled")


@dataclass
class PushedJoinPhysical:
    subplan: PhysicalNode
    pred: object
    target_var: str
    is_edge: bool
    tables: list


class PatternMatchNode(PhysicalNode):
    """Executes the annotated pattern; consumed via relation(), not rows."""

    name = "PatternMatch"

    def __init__(self, graph_name, annotated, pushed_joins, source):
        super().__init__()
        self.graph_name = graph_name
        self.annotated = annotated
        self.pushed_joins = pushed_joins
        self.source = source
        self.last_stats = None

    def children(self):
        return [pj.subplan for pj in self.pushed_joins] + [self.source]

    def describe(self):
        ap = self.annotated
        direction = "fwd"
        for step in ap.steps:
            if step.case == "nodes->nodes":
                direction = "fwd" if step.forward else "rev"
                break
        pushed = ", ".join(f"{v}: {format_expr(p)}" for v, p in sorted(ap.pushed.items()))
        deferred = ", ".join(f"{v}: {format_expr(p)}" for v, p in sorted(ap.deferred.items()))
        text = f"PatternMatch {self.graph_name} start={ap.start_var} dir={direction}"
        text += f" pushed=[{pushed}] deferred=[{deferred}]"
        pruned = sorted(ap.pruned_vars())
        if pruned:
            text += f" pruned={pruned}"
        return text

    def build_view(self, ctx):
        store = ctx.db.graph_store(self.graph_name)
        view = GraphView(store)
        for pj in self.pushed_joins:
            rel_rows = list(pj.subplan.iterate(ctx))
            apply_pushed_join(
                view,
                ctx,
                pj.target_var,
                pj.is_edge,
                pj.tables,
                rel_rows,
                pj.subplan.columns,
                pj.pred,
            )
        return view

    def relation(self, ctx):
        view = self.build_view(ctx)
        if ctx.join_emulation:
            relation = match_by_joins(
                view, self.annotated.pattern,
                {**self.annotated.pushed, **self.annotated.deferred},
                ctx.db.catalog,
            )
        else:
            relation = match_pattern(view, self.annotated)
        self.last_stats = relation.stats
        return relation


def apply_pushed_join(view, ctx, target_var, is_edge, tables, rel_rows, rel_columns, pred):
    """Join a relational input into a graph's vertex or edge candidates.

    Matching records gain extension rows (the joined input's columns);
    records with no match drop out of the candidate set entirely.
    """
    store = view.store
    overlays = view.edge_overlays if is_edge else view.vertex_overlays
    old = overlays.get(target_var)
    rel_index = {name: i for i, name in enumerate(rel_columns)}

    def resolver(ref):
        key = f"{ref.qualifier}.{ref.name}" if ref.qualifier else ref.name
        if key in rel_index:
            return 0, rel_index[key]
        if ref.qualifier == target_var:
            schema = store.collections[tables[0]].schema
            return 1, schema.column_index(ref.name)
        raise SchemaError(f"pushed join cannot resolve {key!r}")

    bound = bind_with_resolver(pred, resolver)

    hash_sides = None
    if isinstance(bound, Comparison) and bound.op == "=":
        if isinstance(bound.left, ColumnRef) and isinstance(bound.right, ColumnRef):
            if {bound.left.side, bound.right.side} == {0, 1}:
                rel_side = bound.left if bound.left.side == 0 else bound.right
                rec_side = bound.right if bound.left.side == 0 else bound.left
                hash_sides = (rel_side, rec_side)

    rel_table = None
    rel_odd = []
    if hash_sides is not None:
        rel_table = {}
        for row in rel_rows:
            v = eval_value(hash_sides[0], row)
            if v is None:
                continue
            if isinstance(v, (dict, list)):
                rel_odd.append(row)
            else:
                rel_table.setdefault(_norm_key(v), []).append(row)

    def matches_for(record):
        if rel_table is not None:
            v = eval_value(hash_sides[1], None, record)
            if v is None:
                return []
            if isinstance(v, (dict, list)):
                return [row for row in rel_rows if eval_predicate(bound, row, record)]
            out = list(rel_table.get(_norm_key(v), ()))
            out.extend(r for r in rel_odd if eval_predicate(bound, r, record))
            return out
        return [row for row in rel_rows if eval_predicate(bound, row, record)]

    new = OverlayTable((old.columns if old else []) + list(rel_columns))
    if old is not None:
        for key in sorted(old.entries):
            oid, record, exts = old.entries[key]
            rows = matches_for(record)
            if not rows:
                continue
            new.entries[key] = (oid, record, [e + tuple(r) for e in exts for r in rows])
    else:
        for oid in tables:
            coll = store.collections[oid]
            for record in coll.scan():
                rows = matches_for(record)
                if not rows:
                    continue
                key = record.tid if is_edge else (oid, record.values[0])
                new.entries[key] = (oid, record, [tuple(r) for r in rows])
    overlays[target_var] = new


class GraphScanNode(PhysicalNode):
    """Flattens a match relation (or scans a vertex/edge table directly)
    into relational rows; input and output are both relational, so the
    node composes with every other operator."""

    name = "GraphScan"

    def __init__(self, match_node=None, proj_columns=None, ext_columns=None,
                 table_mode=None):
        super().__init__()
        self.match_node = match_node
        self.proj_columns = proj_columns or []
        self.ext_columns = ext_columns or []
        self.table_mode = table_mode  # (var, oids, schema, pred) for trimmed matches
        if table_mode is not None:
            var, oids, schema, pred = table_mode
            self.columns = [f"{var}.{c}" for c in schema.column_names()]
        else:
            self.columns = [f"{v}.{c}" for v, c in self.proj_columns] + list(self.ext_columns)

    def children(self):
        return [self.match_node] if self.match_node is not None else []

    def describe(self):
        if self.table_mode is not None:
            var, oids, schema, pred = self.table_mode
            text = f"GraphScan table {schema.name} AS {var}"
            if pred is not None:
                text += f" [{format_expr(pred)}]"
            return text
        return f"GraphScan [{', '.join(self.columns)}]"

    def iterate(self, ctx):
        if self.table_mode is not None:
            var, oids, schema, pred = self.table_mode
            for oid in oids:
                coll = ctx.db.collection_by_oid(oid)
                for record in coll.scan(pred):
                    yield record.values
            return
        relation = self.match_node.relation(ctx)
        col_pos = {name: i for i, name in enumerate(relation.columns)}
        db = ctx.db

        # resolve projection cells once: (relation column index, schema index)
        plan = []
        for var, col in self.proj_columns:
            plan.append(("attr", col_pos[var], col))
        ext_owner = []  # (relation col index, width) per var exposing extensions
        seen = set()
        for var in relation.ext_columns:
            if var not in seen:
                seen.add(var)
                ext_owner.append((col_pos[var], len(relation.ext_columns[var])))

        schema_cache = {}

        def attr_of(bound, col):
            if bound.record is None:
                raise ExecutionError(
                    f"column {col!r} requested from a pruned pattern variable"
                )
            oid = bound.oid
            if oid not in schema_cache:
                schema_cache[oid] = db.schema_by_oid(oid)
            return bound.record.values[schema_cache[oid].column_index(col)]

        for row in relation.rows:
            base = []
            for kind, idx, col in plan:
                base.append(attr_of(row[idx], col))
            if not ext_owner:
                yield tuple(base)
                continue
            # one output row per combination of extension rows
            combos = [()]
            for idx, _width in ext_owner:
                exts = row[idx].ext
                combos = [c + tuple(e) for c in combos for e in exts]
            for combo in combos:
                yield tuple(base) + combo


def cross_model_join(db, left_name, right_name, pred):
    """Join two stored collections, or a collection into a graph.

    Collection x collection returns the linked pair rows. Collection x
    graph returns a GraphView whose target vertex (or edge) candidates
    are join-filtered and extended with the collection's columns; which
    side of the graph is joined follows from the predicate's references,
    and a predicate touching both vertices and edges is rejected, as is
    a join between two graphs.
    """
    from .model import DOC_COLUMN, K_DOCUMENTS
    from .predicates import map_refs
    from dataclasses import replace as _replace

    left_is_graph = left_name in db.catalog.graphs
    right_is_graph = right_name in db.catalog.graphs
    if left_is_graph and right_is_graph:
        raise ContractError(
            "a join between two graphs is not supported; express it as two matches"
        )

    def normalize(ref):
        # a bare path rooted at a document collection addresses its doc column
        if ref.name is None and ref.qualifier in db.catalog.schemas:
            if db.catalog.schema(ref.qualifier).kind == K_DOCUMENTS:
                return _replace(ref, name=DOC_COLUMN)
        return ref

    pred = map_refs(pred, normalize)
    ctx = ExecutionContext(db=db, consts=db.consts)
    if not left_is_graph and not right_is_graph:
        left = TableScanNode(left_name, left_name, db.catalog.schema(left_name))
        right = TableScanNode(right_name, right_name, db.catalog.schema(right_name))
        node = CrossJoinNode(left, right, [pred])
        return QueryResult(columns=node.columns, rows=list(node.iterate(ctx)))

    graph_name = left_name if left_is_graph else right_name
    rel_name = right_name if left_is_graph else left_name
    store = db.graph_store(graph_name)
    graphdef = store.graphdef
    table_names = {
        db.catalog.schema_by_oid(oid).name: (oid, False) for oid in graphdef.vertex_oids
    }
    table_names[db.catalog.schema_by_oid(graphdef.edge_oid).name] = (graphdef.edge_oid, True)
    touched = {
        r.qualifier for r in walk_refs(pred) if r.qualifier in table_names
    }
    if not touched:
        raise ContractError("the join predicate references no table of the graph")
    kinds = {table_names[t][1] for t in touched}
    if len(kinds) > 1:
        raise ContractError("a graph join may touch vertices or edges, not both")
    is_edge = kinds.pop()
    if is_edge and len(touched) > 1:
        raise ContractError("a graph join may target one table")
    scan = TableScanNode(rel_name, rel_name, db.catalog.schema(rel_name))
    rel_rows = list(scan.iterate(ctx))
    view = GraphView(store)
    for table in sorted(touched):
        oid, _ = table_names[table]
        apply_pushed_join(
            view, ctx, table, is_edge, [oid], rel_rows, scan.columns, pred
        )
    return view


def execute(plan, ctx):
    """Pull every row out of the physical tree."""
    root = plan.root if isinstance(plan, PhysicalPlan) else plan
    rows = list(root.iterate(ctx))
    return QueryResult(columns=list(root.columns), rows=rows)


@dataclass
class PhysicalPlan:
    root: PhysicalNode
    rules: list = field(default_factory=list)
    match_nodes: list = field(default_factory=list)
    candidates: list = field(default_factory=list)  # (label, root, cost) tried

    def explain(self):
        lines = []

        def walk(node, depth):
            lines.append(
                "  " * depth
                + f"{node.describe()} cost={node.est_cost:.6g} rows={node.est_rows:.6g}"
            )
            for child in node.children():
                walk(child, depth + 1)

        walk(self.root, 0)
        lines.append("rules: " + ", ".join(self.rules))
        return "\n".join(lines)
