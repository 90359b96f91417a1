"""Cross-model plan optimization.

Four mechanisms, each independently toggleable:

  1. graph predicate pushdown: selection conjuncts on match variables
     move into the match's predicate assignment; conjuncts on joined
     collections whose attribute is equality-linked to a match variable
     are replicated (not moved) onto it.
  2. join pushdown: the joins adjacent to a match may fold into it as
     candidate overlays, producing up to three placement candidates; the
     cheapest by the cost model wins.
  3. rewriting: matches with no topological constraint (or with a
     vertex-edge-vertex shape constrained only on the edge) become plain
     table scans, and unreferenced graph-projection columns are dropped.
  4. traversal pruning: record fetches for pattern variables that are
     neither projected nor predicated are skipped.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .cost import cost_join, cost_scan, join_placement
from .errors import SchemaError
from .executor import (
    CrossJoinNode,
    FilterNode,
    GraphScanNode,
    GraphSourceNode,
    PatternMatchNode,
    PhysicalPlan,
    ProjectNode,
    PushedJoinPhysical,
    TableScanNode,
)
from .graphops import plan_pattern
from .plan import (
    CollectionLeaf,
    GraphProject,
    JoinOp,
    ProjectOp,
    PushedJoin,
    SelectOp,
    TrimmedScan,
    find_nodes,
    plan_variables,
)
from .predicates import (
    ColumnRef,
    Comparison,
    conjoin,
    walk_refs,
)
from .stats import estimate_selectivity

RULE_PREDICATE_PUSHDOWN = "predicate-pushdown"
RULE_JOIN_PUSHDOWN = "join-pushdown"
RULE_REWRITING = "rewriting"
RULE_TRAVERSAL_PRUNING = "traversal-pruning"

ALL_RULES = (
    RULE_PREDICATE_PUSHDOWN,
    RULE_JOIN_PUSHDOWN,
    RULE_REWRITING,
    RULE_TRAVERSAL_PRUNING,
)


@dataclass
class OptimizerOptions:
    enabled: bool = True
    predicate_pushdown: bool = True
    join_pushdown: bool = True
    rewriting: bool = True
    traversal_pruning: bool = True

    def rule_enabled(self, name):
        if not self.enabled:
            return False
        return {
            RULE_PREDICATE_PUSHDOWN: self.predicate_pushdown,
            RULE_JOIN_PUSHDOWN: self.join_pushdown,
            RULE_REWRITING: self.rewriting,
            RULE_TRAVERSAL_PRUNING: self.traversal_pruning,
        }[name]

    def set_rule(self, name, value):
        attr = name.replace("-", "_")
        if not hasattr(self, attr):
            raise SchemaError(f"unknown optimizer rule {name!r}")
        setattr(self, attr, bool(value))


def _match_vars(match):
    return {v.var for v in match.pattern.vertices} | {e.var for e in match.pattern.edges}


def _referenced_var_columns(plan):
    """Every (variable, column) pair referenced above the matches."""
    refs = set()

    def visit_expr(expr):
        for r in walk_refs(expr):
            refs.add((r.qualifier, r.name))

    def visit(node):
        if isinstance(node, ProjectOp):
            if node.items is not None:
                for item in node.items:
                    visit_expr(item.expr)
            visit(node.child)
        elif isinstance(node, SelectOp):
            for c in node.conjuncts:
                visit_expr(c)
            visit(node.child)
        elif isinstance(node, JoinOp):
            for p in node.preds:
                visit_expr(p)
            visit(node.left)
            visit(node.right)
        elif isinstance(node, GraphProject):
            pass  # the match's own predicates are not outer references
        elif isinstance(node, (CollectionLeaf, TrimmedScan)):
            pass

    visit(plan)
    return refs


def _star_projection_vars(plan):
    """SELECT * forces every variable to stay materialized."""
    for node in find_nodes(plan, ProjectOp):
        if node.items is None:
            return True
    return False


# -- rule 1: graph predicate pushdown --------------------------------------------


def rule_graph_predicate_pushdown(plan):
    """Move match-variable conjuncts into the match; replicate conjuncts
    whose attribute is join-linked to a match variable."""
    matches = [gp.child for gp in find_nodes(plan, GraphProject)]
    if not matches:
        return False
    var_of = {}
    for m in matches:
        for v in _match_vars(m):
            var_of[v] = m
    join_preds = []
    for j in find_nodes(plan, JoinOp):
        join_preds.extend(j.preds)
    changed = False
    for sel in find_nodes(plan, SelectOp):
        keep = []
        for conj in sel.conjuncts:
            quals = {r.qualifier for r in walk_refs(conj)}
            if len(quals) == 1 and next(iter(quals)) in var_of:
                var = next(iter(quals))
                m = var_of[var]
                m.phi[var] = conjoin([m.phi.get(var), conj])
                changed = True
                continue  # moved: removed from the selection set
            keep.append(conj)
            # replication: X.a <op> literal with a join equality X.a = var.b
            replicated = _replicate_onto_match(conj, join_preds, var_of)
            if replicated is not None:
                var, pred = replicated
                m = var_of[var]
                m.phi[var] = conjoin([m.phi.get(var), pred])
                changed = True
        sel.conjuncts = keep
    return changed


def _replicate_onto_match(conj, join_preds, var_of):
    if not isinstance(conj, Comparison):
        return None
    ref, lit = None, None
    if isinstance(conj.left, ColumnRef) and not isinstance(conj.right, ColumnRef):
        ref, lit, op = conj.left, conj.right, conj.op
    elif isinstance(conj.right, ColumnRef) and not isinstance(conj.left, ColumnRef):
        from .predicates import FLIPPED

        ref, lit, op = conj.right, conj.left, FLIPPED[conj.op]
    else:
        return None
    if ref.qualifier in var_of:
        return None  # already a graph predicate
    for jp in join_preds:
        if jp.op != "=":
            continue
        sides = [jp.left, jp.right]
        for a, b in (sides, sides[::-1]):
            if (
                isinstance(a, ColumnRef)
                and isinstance(b, ColumnRef)
                and a.qualifier == ref.qualifier
                and a.name == ref.name
                and a.path == ref.path
                and b.qualifier in var_of
                and not b.path
            ):
                return b.qualifier, Comparison(op, ColumnRef(b.qualifier, b.name), lit)
    return None


# -- rule 3: rewriting (match trimming + projection trimming) ---------------------


def rule_match_trimming(plan, db):
    """Replace topology-free (or edge-only) matches with plain scans."""
    changed = [False]
    star = _star_projection_vars(plan)
    referenced = _referenced_var_columns(plan)

    def rewrite(node):
        if isinstance(node, ProjectOp):
            node.child = rewrite(node.child)
            return node
        if isinstance(node, SelectOp):
            node.child = rewrite(node.child)
            return node
        if isinstance(node, JoinOp):
            node.left = rewrite(node.left)
            node.right = rewrite(node.right)
            return node
        if isinstance(node, GraphProject):
            replacement = _try_trim(node, db, star, referenced)
            if replacement is not None:
                changed[0] = True
                return replacement
            return node
        return node

    return rewrite(plan), changed[0]


def _try_trim(gp, db, star, referenced):
    match = gp.child
    if match.pushed_joins:
        return None
    pattern = match.pattern
    store = db.graph_store(match.graph.name)
    catalog = db.catalog
    if len(pattern.vertices) == 1 and not pattern.edges:
        var = pattern.vertices[0].var
        tables = [
            t.oid
            for t in catalog.vertex_tables_with_label(
                match.graph.graphdef, pattern.vertices[0].label
            )
        ]
        return TrimmedScan(
            var=var,
            oids=tables,
            pred=match.phi.get(var),
            columns=[(var, c) for c in catalog.schema_by_oid(tables[0]).column_names()],
            graph=match.graph,
        )
    if len(pattern.vertices) == 2 and len(pattern.edges) == 1:
        edge = pattern.edges[0]
        used_vars = {q for q, _ in referenced if q in _match_vars(match)}
        if star:
            used_vars = _match_vars(match)
        if set(match.phi) - {edge.var}:
            return None
        if used_vars - {edge.var}:
            return None
        # the scan equals the match only when every live edge's endpoints
        # carry the pattern's labels
        src_tables = {
            t.oid
            for t in catalog.vertex_tables_with_label(
                match.graph.graphdef, pattern.vertex(edge.src).label
            )
        }
        dst_tables = {
            t.oid
            for t in catalog.vertex_tables_with_label(
                match.graph.graphdef, pattern.vertex(edge.dst).label
            )
        }
        if not (store.source_oids() <= src_tables and store.target_oids() <= dst_tables):
            return None
        edge_oid = match.graph.graphdef.edge_oid
        return TrimmedScan(
            var=edge.var,
            oids=[edge_oid],
            pred=match.phi.get(edge.var),
            columns=[(edge.var, c) for c in catalog.schema_by_oid(edge_oid).column_names()],
            graph=match.graph,
        )
    return None


def rule_projection_trimming(plan, db):
    """Shrink each graph projection to the externally referenced columns."""
    if _star_projection_vars(plan):
        return False
    referenced = _referenced_var_columns(plan)
    changed = False
    for gp in find_nodes(plan, GraphProject):
        match = gp.child
        cols = []
        for v in match.pattern.vertices:
            schema = db.catalog.schema_by_oid(
                db.catalog.vertex_tables_with_label(match.graph.graphdef, v.label)[0].oid
            )
            for c in schema.column_names():
                if (v.var, c) in referenced:
                    cols.append((v.var, c))
        edge_schema = db.catalog.schema_by_oid(match.graph.graphdef.edge_oid)
        for e in match.pattern.edges:
            for c in edge_schema.column_names():
                if (e.var, c) in referenced:
                    cols.append((e.var, c))
        if gp.columns is None or set(gp.columns) != set(cols):
            gp.columns = sorted(cols)
            changed = True
    return changed


# -- rule 4: traversal pruning -----------------------------------------------------


def rule_traversal_pruning(plan):
    """Mark unprojected, unpredicated pattern variables as fetch-free."""
    changed = False
    for gp in find_nodes(plan, GraphProject):
        if gp.columns is None:
            continue  # untrimmed projection keeps every record
        match = gp.child
        projected = {v for v, _ in gp.columns}
        overlaid = {pj.target_var for pj in match.pushed_joins}
        pruned = set()
        for var in _match_vars(match):
            if var in projected or var in match.phi or var in overlaid:
                continue
            pruned.add(var)
        if pruned != match.pruned_vars:
            match.pruned_vars = pruned
            changed = changed or bool(pruned)
    return changed


# -- rule 2: join pushdown ----------------------------------------------------------


def _layout_of(node, db):
    """Qualified output columns of a relational logical subtree."""
    if isinstance(node, CollectionLeaf):
        return [f"{node.alias}.{c}" for c in node.schema.column_names()]
    if isinstance(node, JoinOp):
        return _layout_of(node.left, db) + _layout_of(node.right, db)
    if isinstance(node, SelectOp):
        return _layout_of(node.child, db)
    raise SchemaError(f"unexpected subtree in join pushdown: {type(node).__name__}")


def _graph_side_target(preds, match):
    """The single pattern variable the join predicates touch, or None."""
    mvars = _match_vars(match)
    targets = set()
    for p in preds:
        for r in walk_refs(p):
            if r.qualifier in mvars:
                targets.add(r.qualifier)
    if len(targets) != 1:
        return None
    (var,) = targets
    is_edge = any(e.var == var for e in match.pattern.edges)
    is_vertex = any(v.var == var for v in match.pattern.vertices)
    if is_edge == is_vertex:
        return None
    return var, is_edge


def rule_join_pushdown(plan, db):
    """Candidate plans folding the joins adjacent to the match inside it."""
    candidates = []
    base = plan

    def locate(node, parent, attr):
        if isinstance(node, (ProjectOp, SelectOp)):
            return locate(node.child, node, "child")
        if isinstance(node, JoinOp):
            if isinstance(node.right, GraphProject):
                return node, parent, attr
            return locate(node.right, node, "right")
        return None

    found = locate(base, None, None)
    if found is None:
        return []
    join, parent, attr = found
    if not join.preds:
        return []
    match = join.right.child
    target = _graph_side_target(join.preds, match)
    if target is None:
        return []
    target_var, is_edge = target
    other_refs_ok = all(
        {r.qualifier for r in walk_refs(p)} <= plan_variables(join.left) | {target_var}
        for p in join.preds
    )
    if not other_refs_ok:
        return []

    inner = copy.deepcopy(plan)
    ijoin, iparent, iattr = locate(inner, None, None)
    imatch = ijoin.right.child
    pushed = PushedJoin(
        subplan=ijoin.left,
        pred=conjoin(ijoin.preds),
        target_var=target_var,
        columns=_layout_of(ijoin.left, db),
    )
    imatch.pushed_joins.append(pushed)
    imatch.pruned_vars.discard(target_var)
    if iparent is None:
        inner = ijoin.right
    else:
        setattr(iparent, iattr, ijoin.right)
    candidates.append(("inner-join-pushed", inner))

    # try folding the next join out as well
    deeper = rule_join_pushdown_second(inner, db)
    if deeper is not None:
        candidates.append(("all-joins-pushed", deeper))
    return candidates


def rule_join_pushdown_second(plan, db):
    """From an inner-pushed plan, also fold the next join out (when its
    predicates stay within the two pushed inputs, pair-join them first;
    when they reference a pattern variable, push a second overlay)."""

    def locate(node, parent, attr):
        if isinstance(node, (ProjectOp, SelectOp)):
            return locate(node.child, node, "child")
        if isinstance(node, JoinOp):
            if isinstance(node.right, GraphProject):
                return node, parent, attr
            return locate(node.right, node, "right")
        return None

    plan = copy.deepcopy(plan)
    found = locate(plan, None, None)
    if found is None:
        return None
    join, parent, attr = found
    if not join.preds:
        return None
    match = join.right.child
    if not match.pushed_joins:
        return None
    first = match.pushed_joins[0]
    left_vars = plan_variables(join.left)
    pred_vars = set()
    for p in join.preds:
        pred_vars |= {r.qualifier for r in walk_refs(p)}
    subplan_vars = plan_variables(first.subplan)

    if pred_vars <= left_vars | subplan_vars:
        # pair-join the two relational inputs, then push the pair
        first.subplan = JoinOp(left=join.left, right=first.subplan, preds=join.preds)
        first.columns = _layout_of(first.subplan, db)
    else:
        target = _graph_side_target(join.preds, match)
        if target is None:
            return None
        target_var, is_edge = target
        if not all(
            {r.qualifier for r in walk_refs(p)} <= left_vars | {target_var}
            for p in join.preds
        ):
            return None
        match.pushed_joins.append(
            PushedJoin(
                subplan=join.left,
                pred=conjoin(join.preds),
                target_var=target_var,
                columns=_layout_of(join.left, db),
            )
        )
        match.pruned_vars.discard(target_var)
    if parent is None:
        return join.right
    setattr(parent, attr, join.right)
    return plan


# -- physical planning ----------------------------------------------------------------


def _is_edge_var(match, var):
    return any(e.var == var for e in match.pattern.edges)


def _tables_for_var(match, var, db):
    if _is_edge_var(match, var):
        return [match.graph.graphdef.edge_oid]
    label = match.pattern.vertex(var).label
    return [t.oid for t in db.catalog.vertex_tables_with_label(match.graph.graphdef, label)]


class PhysicalPlanner:
    """Lowers a logical plan to physical nodes with cost annotations."""

    def __init__(self, db, consts, options, logical):
        self.db = db
        self.consts = consts
        self.options = options
        self.var_schema = {}  # variable -> schema used for selectivity lookups
        for leaf in find_nodes(logical, CollectionLeaf):
            self.var_schema[leaf.alias] = leaf.schema
        for gp in find_nodes(logical, GraphProject):
            match = gp.child
            for v in match.pattern.vertices:
                tables = db.catalog.vertex_tables_with_label(match.graph.graphdef, v.label)
                self.var_schema[v.var] = tables[0]
            edge_schema = db.catalog.schema_by_oid(match.graph.graphdef.edge_oid)
            for e in match.pattern.edges:
                self.var_schema[e.var] = edge_schema

    def stats_for_qualifier(self, qual):
        schema = self.var_schema.get(qual)
        return self.db.stats(schema.oid) if schema is not None else None

    def conjunct_selectivity(self, conj):
        quals = {r.qualifier for r in walk_refs(conj)}
        if len(quals) != 1:
            return 1.0
        return estimate_selectivity(conj, self.stats_for_qualifier(next(iter(quals))))

    def join_selectivity(self, preds):
        sel = 1.0
        for p in preds:
            if isinstance(p, Comparison) and p.op == "=":
                ndvs = []
                for side in (p.left, p.right):
                    if isinstance(side, ColumnRef) and not side.path:
                        stats = self.stats_for_qualifier(side.qualifier)
                        col = stats.column(side.name) if stats else None
                        if col and col.ndv:
                            ndvs.append(col.ndv)
                sel *= 1.0 / max(ndvs) if ndvs else 0.1
        return min(sel, 1.0)

    def join_cost(self, n_left, n_right, hashable):
        """Nested-loop cost, with the quadratic CPU term replaced by a
        linear build+probe term when the hash fast path applies."""
        placement = join_placement(n_left, n_right, self.consts)
        cost = cost_join(n_left, n_right, placement, self.consts)
        if hashable:
            cost = cost - n_left * n_right * self.consts.cpu + (n_left + n_right) * self.consts.cpu
        return cost

    def lower(self, node):
        db, consts = self.db, self.consts
        if isinstance(node, ProjectOp):
            child = self.lower(node.child)
            out = ProjectNode(child, node.items)
            out.est_rows = child.est_rows
            out.est_cost = child.est_cost + child.est_rows * consts.cpu
            return out
        if isinstance(node, SelectOp):
            child = self.lower(node.child)
            if not node.conjuncts:
                return child
            out = FilterNode(child, node.conjuncts)
            sel = 1.0
            for c in node.conjuncts:
                sel *= self.conjunct_selectivity(c)
            out.est_rows = child.est_rows * sel
            out.est_cost = child.est_cost + child.est_rows * consts.cpu * len(node.conjuncts)
            return out
        if isinstance(node, JoinOp):
            left = self.lower(node.left)
            right = self.lower(node.right)
            out = CrossJoinNode(left, right, node.preds)
            out.est_rows = left.est_rows * right.est_rows * self.join_selectivity(node.preds)
            out.est_cost = (
                left.est_cost
                + right.est_cost
                + self.join_cost(left.est_rows, right.est_rows, out.hash_key is not None)
            )
            return out
        if isinstance(node, CollectionLeaf):
            out = TableScanNode(node.alias, node.name, node.schema)
            live = db.collection(node.name).live_count()
            out.est_rows = float(live)
            out.est_cost = cost_scan(live, consts)
            return out
        if isinstance(node, TrimmedScan):
            schema = db.catalog.schema_by_oid(node.oids[0])
            out = GraphScanNode(table_mode=(node.var, node.oids, schema, node.pred))
            live = sum(db.collection_by_oid(oid).live_count() for oid in node.oids)
            sel = estimate_selectivity(node.pred, db.stats(node.oids[0])) if node.pred else 1.0
            out.est_rows = live * sel
            out.est_cost = cost_scan(live, consts)
            return out
        if isinstance(node, GraphProject):
            return self.lower_match(node)
        raise SchemaError(f"cannot lower {type(node).__name__}")

    def lower_match(self, gp):
        db, consts, options = self.db, self.consts, self.options
        match = gp.child
        store = db.graph_store(match.graph.name)
        pushed_phys = []
        size_hints = {}
        overlay_vertex = set()
        overlay_edge = set()
        join_into_cost = 0.0
        for pj in match.pushed_joins:
            sub = self.lower(pj.subplan)
            is_edge = _is_edge_var(match, pj.target_var)
            tables = _tables_for_var(match, pj.target_var, db)
            pushed_phys.append(
                PushedJoinPhysical(sub, pj.pred, pj.target_var, is_edge, tables)
            )
            (overlay_edge if is_edge else overlay_vertex).add(pj.target_var)
            table_live = sum(db.collection_by_oid(oid).live_count() for oid in tables)
            hint = self._overlay_size_hint(pj.pred, sub.est_rows, table_live, tables, match)
            size_hints[pj.target_var] = min(size_hints.get(pj.target_var, hint), hint)
            hashable = isinstance(pj.pred, Comparison) and pj.pred.op == "="
            join_into_cost += sub.est_cost + self.join_cost(
                sub.est_rows, table_live, hashable
            )

        annotated = plan_pattern(
            match.pattern,
            match.phi,
            store,
            db.catalog,
            db.stats,
            consts,
            push_enabled=options.enabled,
            elide_enabled=options.enabled,
            pruned_vars=frozenset(match.pruned_vars),
            overlay_vertex_vars=frozenset(overlay_vertex),
            overlay_edge_vars=frozenset(overlay_edge),
            size_hints=size_hints,
        )
        pm = PatternMatchNode(
            match.graph.name, annotated, pushed_phys, GraphSourceNode(match.graph.name)
        )
        pm.est_rows = annotated.est_rows
        pm.est_cost = annotated.est_cost + join_into_cost

        if gp.columns is None:
            cols = []
            for v in match.pattern.vertices:
                oid = _tables_for_var(match, v.var, db)[0]
                cols.extend((v.var, c) for c in db.catalog.schema_by_oid(oid).column_names())
            edge_schema = db.catalog.schema_by_oid(match.graph.graphdef.edge_oid)
            for e in match.pattern.edges:
                cols.extend((e.var, c) for c in edge_schema.column_names())
        else:
            cols = list(gp.columns)
        ext_cols = []
        for pj in pushed_phys:
            if not pj.is_edge:
                ext_cols.extend(pj.subplan.columns)
        for pj in pushed_phys:
            if pj.is_edge:
                ext_cols.extend(pj.subplan.columns)
        gs = GraphScanNode(match_node=pm, proj_columns=cols, ext_columns=ext_cols)
        gs.est_rows = pm.est_rows
        gs.est_cost = pm.est_cost + pm.est_rows * consts.cpu
        return gs

    def _overlay_size_hint(self, pred, rel_rows, table_live, tables, match):
        ndv = None
        for r in walk_refs(pred):
            if r.qualifier in _match_vars(match):
                stats = self.db.stats(tables[0])
                col = stats.column(r.name) if stats else None
                if col and col.ndv:
                    ndv = col.ndv
                break
        if ndv:
            return min(table_live, max(1.0, rel_rows * table_live / ndv))
        return min(table_live, max(1.0, rel_rows))


def to_physical(logical, db, consts, options):
    return PhysicalPlanner(db, consts, options, logical).lower(logical)


def optimize(logical, db, consts, options=None):
    """Apply the enabled rules, enumerate join placements, cost each
    candidate, and return the cheapest physical plan."""
    options = options or OptimizerOptions()
    plan = copy.deepcopy(logical)
    applied = []
    if options.rule_enabled(RULE_PREDICATE_PUSHDOWN):
        if rule_graph_predicate_pushdown(plan):
            applied.append(RULE_PREDICATE_PUSHDOWN)
    if options.rule_enabled(RULE_REWRITING):
        plan, trimmed = rule_match_trimming(plan, db)
        projected = rule_projection_trimming(plan, db)
        if trimmed or projected:
            applied.append(RULE_REWRITING)
    if options.rule_enabled(RULE_TRAVERSAL_PRUNING):
        if rule_traversal_pruning(plan):
            applied.append(RULE_TRAVERSAL_PRUNING)
    shapes = [("original", plan)]
    if options.rule_enabled(RULE_JOIN_PUSHDOWN):
        extra = rule_join_pushdown(plan, db)
        if extra:
            applied.append(RULE_JOIN_PUSHDOWN)
            shapes.extend(extra)
    best = None
    tried = []
    for label, cand in shapes:
        phys_root = to_physical(cand, db, consts, options)
        tried.append((label, phys_root, phys_root.est_cost))
        if best is None or phys_root.est_cost < best[1].est_cost:
            best = (label, phys_root)
    result = PhysicalPlan(root=best[1], rules=applied, candidates=tried)
    result.match_nodes = _collect_matches(result.root)
    return result


def candidate_plans(logical, db, consts, options=None):
    """Every join-placement candidate as its own executable plan."""
    options = options or OptimizerOptions()
    plan = copy.deepcopy(logical)
    if options.rule_enabled(RULE_PREDICATE_PUSHDOWN):
        rule_graph_predicate_pushdown(plan)
    if options.rule_enabled(RULE_REWRITING):
        plan, _ = rule_match_trimming(plan, db)
        rule_projection_trimming(plan, db)
    if options.rule_enabled(RULE_TRAVERSAL_PRUNING):
        rule_traversal_pruning(plan)
    shapes = [("original", plan)]
    if options.rule_enabled(RULE_JOIN_PUSHDOWN):
        shapes.extend(rule_join_pushdown(plan, db))
    out = []
    for label, cand in shapes:
        root = to_physical(cand, db, consts, options)
        pp = PhysicalPlan(root=root, rules=[label])
        pp.match_nodes = _collect_matches(root)
        out.append((label, pp))
    return out


def _collect_matches(root):
    out = []

    def walk(node):
        if isinstance(node, PatternMatchNode):
            out.append(node)
        for child in node.children():
            walk(child)

    walk(root)
    return out
