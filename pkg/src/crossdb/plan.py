"""Logical plans: canonical query shape and name resolution.

The canonical shape is a projection over a selection over a right-deep
join chain whose rightmost leaf is the graph-projected match (when the
query has one):

    Project(Select(H1 join (H2 join ... (GraphProject(Match(G))))))

WHERE conjuncts split into join predicates (cross-variable equalities)
and selection conjuncts; everything else about placement is left to the
optimizer rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import SchemaError
from .graphops import Pattern, PatternEdge, PatternVertex
from .model import DOC_COLUMN, K_DOCUMENTS
from .parser import EdgeAtom, SelectItem, SelectQuery, VertexAtom
from .predicates import (
    ColumnRef,
    Comparison,
    conjuncts,
    format_expr,
    map_refs,
    walk_refs,
)

# -- logical nodes -------------------------------------------------------------


@dataclass
class CollectionLeaf:
    alias: str
    name: str
    schema: object


@dataclass
class GraphLeaf:
    name: str
    graphdef: object


@dataclass
class PushedJoin:
    """A cross-model join folded into the match's candidate construction."""

    subplan: object
    pred: object
    target_var: str
    columns: list  # qualified output columns of the subplan


@dataclass
class MatchOp:
    graph: GraphLeaf
    pattern: Pattern
    phi: dict = field(default_factory=dict)  # var -> predicate
    pushed_joins: list = field(default_factory=list)
    pruned_vars: set = field(default_factory=set)


@dataclass
class GraphProject:
    child: MatchOp
    columns: list | None = None  # list of (var, column); None means all


@dataclass
class JoinOp:
    left: object
    right: object
    preds: list = field(default_factory=list)


@dataclass
class SelectOp:
    child: object
    conjuncts: list = field(default_factory=list)


@dataclass
class ProjectOp:
    child: object
    items: tuple | None  # None means *


@dataclass
class TrimmedScan:
    """A match rewritten to a plain scan over vertex or edge tables."""

    var: str
    oids: list
    pred: object  # predicate on the scanned records, or None
    columns: list  # (var, column) pairs for the output layout
    graph: GraphLeaf


# -- name resolution -------------------------------------------------------------


@dataclass
class VarInfo:
    kind: str  # 'relation' | 'documents' | 'vertex' | 'edge'
    schemas: list  # candidate schemas (vertex labels may map to several tables)

    def column_names(self):
        return self.schemas[0].column_names()

    def has_column(self, name):
        return all(s.has_column(name) for s in self.schemas)


class Namespace:
    """Maps query variables (source aliases and pattern vars) to schemas."""

    def __init__(self):
        self.vars = {}
        self.order = []

    def add(self, var, info):
        if var in self.vars:
            raise SchemaError(f"duplicate variable {var!r}")
        self.vars[var] = info
        self.order.append(var)

    def info(self, var):
        if var not in self.vars:
            raise SchemaError(f"unknown variable {var!r}")
        return self.vars[var]

    def __contains__(self, var):
        return var in self.vars

    def normalize_ref(self, ref):
        """Rewrite a parsed ref so qualifier is always the variable name.

        Handles `O->>'k'` (collection-rooted path), `C.id`, bare `title`
        (unique column search), and `v.col->>'k'`.
        """
        if ref.qualifier is None:
            if ref.name in self.vars:
                info = self.vars[ref.name]
                if info.kind == K_DOCUMENTS:
                    if not ref.path:
                        raise SchemaError(
                            f"{ref.name!r} is a document collection; address it with a path"
                        )
                    return replace(ref, qualifier=ref.name, name=DOC_COLUMN)
                raise SchemaError(f"{ref.name!r} names a source, not a column")
            owners = [
                var
                for var, info in self.vars.items()
                if info.has_column(ref.name)
            ]
            if not owners:
                raise SchemaError(f"column {ref.name!r} not found in any source")
            if len(owners) > 1:
                raise SchemaError(f"column {ref.name!r} is ambiguous: {sorted(owners)}")
            return replace(ref, qualifier=owners[0])
        info = self.info(ref.qualifier)
        name = ref.name
        if info.kind == K_DOCUMENTS and name != DOC_COLUMN:
            # `O.k`-style access sugar over the document column
            return replace(ref, name=DOC_COLUMN, path=(name,) + ref.path)
        if not info.has_column(name):
            raise SchemaError(f"no column {name!r} on {ref.qualifier!r}")
        return ref

    def normalize_expr(self, expr):
        return map_refs(expr, self.normalize_ref)


# -- plan construction --------------------------------------------------------------


def _pattern_from_clause(match_clause):
    atoms = match_clause.atoms
    vertices = []
    edges = []
    for i, atom in enumerate(atoms):
        if isinstance(atom, VertexAtom):
            if not any(v.var == atom.var for v in vertices):
                vertices.append(PatternVertex(atom.var, atom.label))
        elif isinstance(atom, EdgeAtom):
            left = atoms[i - 1]
            right = atoms[i + 1]
            src, dst = (left.var, right.var) if atom.forward else (right.var, left.var)
            edges.append(PatternEdge(atom.var, atom.label, src, dst))
    return Pattern(vertices, edges)


def build_logical_plan(ast, catalog):
    """Resolve names and build the canonical plan for one SELECT query."""
    if not isinstance(ast, SelectQuery):
        raise SchemaError("expected a SELECT query")
    ns = Namespace()
    collection_leaves = []
    graph_leaf = None
    for src in ast.sources:
        if src.name in catalog.graphs:
            if graph_leaf is not None:
                raise SchemaError("at most one graph source per query")
            graph_leaf = GraphLeaf(src.name, catalog.graph(src.name))
        else:
            schema = catalog.schema(src.name)
            ns.add(src.alias, VarInfo(schema.kind, [schema]))
            collection_leaves.append(CollectionLeaf(src.alias, src.name, schema))

    match_op = None
    if ast.match is not None:
        if graph_leaf is None:
            raise SchemaError("MATCH requires a graph source in FROM")
        pattern = _pattern_from_clause(ast.match)
        for pv in pattern.vertices:
            tables = catalog.vertex_tables_with_label(graph_leaf.graphdef, pv.label)
            if not tables:
                raise SchemaError(
                    f"graph {graph_leaf.name} has no vertex table labeled {pv.label!r}"
                )
            ns.add(pv.var, VarInfo("vertex", tables))
        edge_schema = catalog.schema_by_oid(graph_leaf.graphdef.edge_oid)
        for pe in pattern.edges:
            if pe.label != graph_leaf.graphdef.edge_label:
                raise SchemaError(
                    f"graph {graph_leaf.name} edges are labeled "
                    f"{graph_leaf.graphdef.edge_label!r}, not {pe.label!r}"
                )
            ns.add(pe.var, VarInfo("edge", [edge_schema]))
        match_op = MatchOp(graph=graph_leaf, pattern=pattern)
    elif graph_leaf is not None:
        raise SchemaError(f"graph source {graph_leaf.name!r} requires a MATCH clause")

    where = ns.normalize_expr(ast.where) if ast.where is not None else None
    join_preds = []
    selections = []
    for conj in conjuncts(where):
        vars_used = {r.qualifier for r in walk_refs(conj)}
        if (
            isinstance(conj, Comparison)
            and len(vars_used) == 2
            and isinstance(conj.left, ColumnRef)
            and isinstance(conj.right, ColumnRef)
            and conj.left.qualifier != conj.right.qualifier
        ):
            join_preds.append(conj)
        else:
            selections.append(conj)

    items = None
    if ast.items is not None:
        items = tuple(
            SelectItem(ns.normalize_expr(it.expr), it.alias) for it in ast.items
        )
    # every referenced variable must exist (normalize_expr already checked);
    # additionally, a match variable used anywhere must come from the pattern
    tree, leftover = _build_join_tree(collection_leaves, match_op, join_preds)
    plan = tree
    all_selections = selections + leftover
    if all_selections:
        plan = SelectOp(plan, all_selections)
    plan = ProjectOp(plan, items)
    return plan


def _build_join_tree(leaves, match_op, join_preds):
    rightmost = GraphProject(match_op) if match_op is not None else None
    if rightmost is None:
        if not leaves:
            raise SchemaError("FROM needs at least one source")
        rightmost = leaves[-1]
        leaves = leaves[:-1]
    unplaced = list(join_preds)
    node = rightmost
    right_vars = plan_variables(node)
    for leaf in reversed(leaves):
        here = []
        for pred in list(unplaced):
            used = {r.qualifier for r in walk_refs(pred)}
            if leaf.alias in used and used <= right_vars | {leaf.alias}:
                here.append(pred)
                unplaced.remove(pred)
        node = JoinOp(left=leaf, right=node, preds=here)
        right_vars.add(leaf.alias)
    # leftovers (both sides inside one subtree) act as plain selections
    return node, unplaced


def plan_variables(node):
    """All variables whose columns a subtree's layout exposes."""
    if isinstance(node, CollectionLeaf):
        return {node.alias}
    if isinstance(node, GraphProject):
        out = {v.var for v in node.child.pattern.vertices}
        out |= {e.var for e in node.child.pattern.edges}
        for pj in node.child.pushed_joins:
            out |= plan_variables(pj.subplan)
        return out
    if isinstance(node, TrimmedScan):
        return {node.var}
    if isinstance(node, JoinOp):
        return plan_variables(node.left) | plan_variables(node.right)
    if isinstance(node, (SelectOp, ProjectOp)):
        return plan_variables(node.child)
    if isinstance(node, MatchOp):
        out = {v.var for v in node.pattern.vertices} | {e.var for e in node.pattern.edges}
        for pj in node.pushed_joins:
            out |= plan_variables(pj.subplan)
        return out
    raise SchemaError(f"unknown plan node {type(node).__name__}")


def find_nodes(node, node_type):
    out = []
    if isinstance(node, node_type):
        out.append(node)
    for child in _children(node):
        out.extend(find_nodes(child, node_type))
    return out


def _children(node):
    if isinstance(node, JoinOp):
        return [node.left, node.right]
    if isinstance(node, (SelectOp, ProjectOp)):
        return [node.child]
    if isinstance(node, GraphProject):
        return [node.child]
    if isinstance(node, MatchOp):
        return [pj.subplan for pj in node.pushed_joins]
    return []


def format_plan(node, depth=0):
    pad = "  " * depth
    if isinstance(node, ProjectOp):
        items = "*" if node.items is None else ", ".join(
            format_expr(i.expr) for i in node.items
        )
        return f"{pad}Project [{items}]\n" + format_plan(node.child, depth + 1)
    if isinstance(node, SelectOp):
        text = " AND ".join(format_expr(c) for c in node.conjuncts)
        return f"{pad}Select [{text}]\n" + format_plan(node.child, depth + 1)
    if isinstance(node, JoinOp):
        text = " AND ".join(format_expr(c) for c in node.preds) or "true"
        return (
            f"{pad}Join [{text}]\n"
            + format_plan(node.left, depth + 1)
            + format_plan(node.right, depth + 1)
        )
    if isinstance(node, GraphProject):
        cols = "*" if node.columns is None else ", ".join(f"{v}.{c}" for v, c in node.columns)
        return f"{pad}GraphProject [{cols}]\n" + format_plan(node.child, depth + 1)
    if isinstance(node, MatchOp):
        phi = ", ".join(f"{v}: {format_expr(p)}" for v, p in sorted(node.phi.items()))
        out = f"{pad}Match {node.graph.name} [{phi}]\n"
        for pj in node.pushed_joins:
            out += f"{pad}  pushed join on {pj.target_var} [{format_expr(pj.pred)}]\n"
            out += format_plan(pj.subplan, depth + 2)
        return out
    if isinstance(node, TrimmedScan):
        pred = format_expr(node.pred) if node.pred is not None else "true"
        return f"{pad}TrimmedScan {node.var} [{pred}]\n"
    if isinstance(node, CollectionLeaf):
        return f"{pad}Collection {node.name} AS {node.alias}\n"
    return f"{pad}{type(node).__name__}\n"
