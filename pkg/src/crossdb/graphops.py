"""Graph-native operators: record/topology traversal, pattern matching,
and path search.

The traversal operator bridges the record store and the topology store
across four operand shapes (vertex records to node ids, node ids to
vertex records, node ids to adjacent node ids, node ids to incident
edge records). Pattern matching composes an ordered sequence of those
steps over a pattern graph, with attribute predicates either pushed
into candidate construction or deferred to a post-filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cost as costmod
from .cost import (
    CASE_NODES_TO_EDGES,
    CASE_NODES_TO_NODES,
    CASE_NODES_TO_RECORDS,
    CASE_RECORDS_TO_NODES,
)
from .errors import ContractError, ConsistencyError, NotFoundError, SchemaError
from .model import get_vertex_key
from .predicates import Comparison, bind_to_schema, conjoin, conjuncts, eval_predicate
from .stats import estimate_selectivity
from .topology import FORWARD, REVERSE

KIND_VERTEX_RECORDS = "vertex-records"
KIND_NODE_IDS = "node-ids"
KIND_EDGE_RECORDS = "edge-records"

LAMBDA_CAP = 1_000_000.0


@dataclass
class OperandSet:
    """Homogeneous operand for traversal; the index makes membership O(1).

    Vertex-record members are (oid, record) pairs, node-id members are
    nids, edge-record members are records. An index of None means the
    operand is universal (no membership restriction).
    """

    kind: str
    members: list
    index: set | None = None

    @classmethod
    def vertex_records(cls, pairs, restrict=True):
        idx = {(oid, rec.tid) for oid, rec in pairs} if restrict else None
        return cls(KIND_VERTEX_RECORDS, list(pairs), idx)

    @classmethod
    def node_ids(cls, nids, restrict=True):
        nids = list(nids)
        return cls(KIND_NODE_IDS, nids, set(nids) if restrict else None)

    @classmethod
    def edge_records(cls, records, restrict=True):
        records = list(records)
        return cls(KIND_EDGE_RECORDS, records, {r.tid for r in records} if restrict else None)


def traverse(case, o1, o2, store):
    """Emit valid (r1, r2) pairs for one of the four operand shapes."""
    if case == CASE_RECORDS_TO_NODES:
        if o1.kind != KIND_VERTEX_RECORDS or o2.kind != KIND_NODE_IDS:
            raise ContractError(f"operand kinds do not match {case}")
        for oid, record in o1.members:
            schema = store.collections[oid].schema
            nid = store.nid_of(get_vertex_key(record, schema))
            if o2.index is None or nid in o2.index:
                yield (record, nid)
    elif case == CASE_NODES_TO_RECORDS:
        if o1.kind != KIND_NODE_IDS or o2.kind != KIND_VERTEX_RECORDS:
            raise ContractError(f"operand kinds do not match {case}")
        for nid in o1.members:
            try:
                oid, record = store.fetch_vertex(nid)
            except NotFoundError as exc:
                raise ConsistencyError(f"dangling nid {nid}: {exc}") from exc
            if o2.index is not None and (oid, record.tid) not in o2.index:
                continue
            yield (nid, record)
    elif case == CASE_NODES_TO_NODES:
        if o1.kind != KIND_NODE_IDS or o2.kind != KIND_NODE_IDS:
            raise ContractError(f"operand kinds do not match {case}")
        for src in o1.members:
            for dst in store.neighbors(src, FORWARD):
                if o2.index is None or dst in o2.index:
                    yield (src, dst)
    elif case == CASE_NODES_TO_EDGES:
        if o1.kind != KIND_NODE_IDS or o2.kind != KIND_EDGE_RECORDS:
            raise ContractError(f"operand kinds do not match {case}")
        for src in o1.members:
            for dst in store.neighbors(src, FORWARD):
                oid, tid = store.edge_of(src, dst)
                if o2.index is not None and tid not in o2.index:
                    continue
                try:
                    record = store.collections[oid].fetch(tid)
                except NotFoundError as exc:
                    raise ConsistencyError(f"edge map points at dead record: {exc}") from exc
                yield (src, record)
    else:
        raise ContractError(f"unknown traversal case {case!r}")


# -- patterns -------------------------------------------------------------


@dataclass(frozen=True)
class PatternVertex:
    var: str
    label: str


@dataclass(frozen=True)
class PatternEdge:
    var: str
    label: str
    src: str  # source vertex var
    dst: str  # target vertex var


@dataclass
class Pattern:
    """A chain or tree of labeled pattern edges over labeled vertices."""

    vertices: list
    edges: list

    def __post_init__(self):
        names = [v.var for v in self.vertices] + [e.var for e in self.edges]
        if len(set(names)) != len(names):
            raise SchemaError("pattern variables must be unique")
        by_var = {v.var for v in self.vertices}
        for e in self.edges:
            if e.src not in by_var or e.dst not in by_var:
                raise SchemaError(f"pattern edge {e.var} references unknown vertex")

    def vertex(self, var):
        for v in self.vertices:
            if v.var == var:
                return v
        raise SchemaError(f"no pattern vertex {var!r}")

    def degree(self, var):
        return sum(1 for e in self.edges if var in (e.src, e.dst))

    def is_tree(self):
        """Connected and acyclic over the undirected pattern edges."""
        if len(self.edges) != len(self.vertices) - 1:
            return False
        seen = {self.vertices[0].var}
        frontier = [self.vertices[0].var]
        adj = {}
        for e in self.edges:
            adj.setdefault(e.src, []).append(e.dst)
            adj.setdefault(e.dst, []).append(e.src)
        while frontier:
            cur = frontier.pop()
            for nxt in adj.get(cur, []):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return len(seen) == len(self.vertices)


@dataclass
class Step:
    """One planned traversal step; `var` is the variable it binds."""

    case: str
    var: str
    src_var: str | None = None
    dst_var: str | None = None  # edge steps: pattern-oriented endpoints
    forward: bool = True  # adjacency direction for node->node steps
    membership: bool = True
    fetch: bool = True  # record-fetch steps: False when pruned

    def describe(self):
        bits = [self.case, self.var]
        if self.case == CASE_NODES_TO_NODES:
            bits.append("fwd" if self.forward else "rev")
            if not self.membership:
                bits.append("no-check")
        if not self.fetch:
            bits.append("pruned")
        return ":".join(bits)


@dataclass
class AnnotatedPattern:
    pattern: Pattern
    start_var: str
    steps: list
    pushed: dict  # var -> predicate applied during candidate construction
    deferred: dict  # var -> predicate applied as a post-filter
    vertex_tables: dict  # vertex var -> list of table oids
    edge_oid: int
    est_rows: float = 0.0
    est_cost: float = 0.0

    def pruned_vars(self):
        return {s.var for s in self.steps if not s.fetch}


@dataclass
class MatchStats:
    start_candidates: int = 0
    step_emissions: list = field(default_factory=list)
    rows: int = 0


@dataclass
class BoundVertex:
    nid: int
    oid: int | None = None
    record: object = None
    ext: tuple = ()  # extension rows attached by pushed joins


@dataclass
class BoundEdge:
    pair: tuple
    oid: int | None = None
    record: object = None
    ext: tuple = ()


@dataclass
class GraphRelation:
    """Relational view of a match: one column per pattern variable."""

    columns: list  # pattern variable names
    rows: list  # tuples of BoundVertex / BoundEdge aligned to columns
    ext_columns: dict  # var -> list of qualified extension column names
    stats: MatchStats


class OverlayTable:
    """Join-filtered, attribute-extended replacement for a var's records."""

    def __init__(self, columns):
        self.columns = list(columns)  # qualified extension column names
        self.entries = {}  # key -> (oid, record, list of extension tuples)


class GraphView:
    """A graph store plus per-pattern-variable join overlays."""

    def __init__(self, store):
        self.store = store
        self.vertex_overlays = {}  # vertex var -> OverlayTable keyed by (oid, vid)
        self.edge_overlays = {}  # edge var -> OverlayTable keyed by tid


# -- candidate construction ------------------------------------------------


class Candidates:
    """Either a symbolic whole-table set or a materialized id-indexed set."""

    def __init__(self, tables, by_id=None):
        self.tables = set(tables)
        self.by_id = by_id  # None means universal within `tables`

    @property
    def universal(self):
        return self.by_id is None

    def size(self):
        return len(self.by_id) if self.by_id is not None else None


def _scan_with_pred(collection, pred):
    if pred is None:
        return list(collection.scan())
    return list(collection.scan(pred))


def build_vertex_candidates(view, var, oids, pushed_pred, need_records):
    """Candidate map nid -> (oid, record, ext). Universal when unfiltered.

    need_records forces materialization (the start variable seeds the
    traversal from concrete records).
    """
    store = view.store
    overlay = view.vertex_overlays.get(var)
    if overlay is None and pushed_pred is None and not need_records:
        return Candidates(oids)
    by_id = {}
    if overlay is not None:
        bound_by_oid = {}
        for key in sorted(overlay.entries):
            oid, record, exts = overlay.entries[key]
            if oid not in oids:
                continue
            if pushed_pred is not None:
                if oid not in bound_by_oid:
                    bound_by_oid[oid] = bind_to_schema(
                        pushed_pred, store.collections[oid].schema
                    )
                if not eval_predicate(bound_by_oid[oid], record):
                    continue
            nid = store.nid_of(key)
            by_id[nid] = (oid, record, tuple(exts))
        return Candidates(oids, by_id)
    for oid in oids:
        coll = store.collections[oid]
        for record in _scan_with_pred(coll, pushed_pred):
            nid = store.nid_of((oid, record.values[0]))
            by_id[nid] = (oid, record, ())
    return Candidates(oids, by_id)


def build_edge_candidates(view, var, edge_oid, pushed_pred):
    store = view.store
    overlay = view.edge_overlays.get(var)
    if overlay is None and pushed_pred is None:
        return Candidates([edge_oid])
    by_id = {}
    if overlay is not None:
        bound = None
        if pushed_pred is not None:
            bound = bind_to_schema(pushed_pred, store.collections[edge_oid].schema)
        for tid in sorted(overlay.entries):
            oid, record, exts = overlay.entries[tid]
            if bound is not None and not eval_predicate(bound, record):
                continue
            by_id[tid] = (oid, record, tuple(exts))
        return Candidates([edge_oid], by_id)
    coll = store.collections[edge_oid]
    for record in _scan_with_pred(coll, pushed_pred):
        by_id[record.tid] = (edge_oid, record, ())
    return Candidates([edge_oid], by_id)


# -- planning ---------------------------------------------------------------


def resolve_pattern_tables(pattern, graphdef, catalog):
    """Map vertex vars to table oids; validate edge labels. Plan-time errors."""
    vertex_tables = {}
    for pv in pattern.vertices:
        tables = catalog.vertex_tables_with_label(graphdef, pv.label)
        if not tables:
            raise SchemaError(f"graph {graphdef.name} has no vertex table labeled {pv.label!r}")
        vertex_tables[pv.var] = [t.oid for t in tables]
    for pe in pattern.edges:
        if pe.label != graphdef.edge_label:
            raise SchemaError(
                f"graph {graphdef.name} edges are labeled {graphdef.edge_label!r}, not {pe.label!r}"
            )
    return vertex_tables


def split_push_defer(phi, stats_for_var, consts, push_enabled, range_cost_fn=None):
    """Classify each conjunct: equality pushed, != deferred, range by cost."""
    pushed, deferred = {}, {}
    for var, pred in phi.items():
        push_parts, defer_parts = [], []
        for part in conjuncts(pred):
            op = part.op if isinstance(part, Comparison) else None
            if not push_enabled:
                defer_parts.append(part)
            elif op == "=":
                push_parts.append(part)
            elif op == "!=":
                defer_parts.append(part)
            elif op in ("<", "<=", ">", ">="):
                stats = stats_for_var(var)
                if stats is None:
                    defer_parts.append(part)
                elif range_cost_fn is None or range_cost_fn(var, part):
                    push_parts.append(part)
                else:
                    defer_parts.append(part)
            else:
                # boolean structure below a conjunct is not pushable as-is
                defer_parts.append(part)
        if push_parts:
            pushed[var] = conjoin(push_parts)
        if defer_parts:
            deferred[var] = conjoin(defer_parts)
    return pushed, deferred


def plan_pattern(
    pattern,
    phi,
    store,
    catalog,
    stats_provider,
    consts,
    push_enabled=True,
    elide_enabled=True,
    pruned_vars=frozenset(),
    overlay_vertex_vars=frozenset(),
    overlay_edge_vars=frozenset(),
    size_hints=None,
):
    """Choose start side, traversal direction, and per-predicate placement.

    phi maps pattern variables to their attribute predicates. Overlay
    vars name pattern variables whose candidates a pushed join will
    replace at execution time; size_hints carries their estimated
    cardinalities. Returns an AnnotatedPattern whose step list drives
    match_pattern.
    """
    graphdef = store.graphdef
    if pattern.edges and not pattern.is_tree():
        raise SchemaError("only chain or tree patterns are supported")
    vertex_tables = resolve_pattern_tables(pattern, graphdef, catalog)
    edge_oid = graphdef.edge_oid
    size_hints = size_hints or {}

    def stats_for_var(var):
        if var in vertex_tables:
            return stats_provider(vertex_tables[var][0])
        return stats_provider(edge_oid)

    def estimate_var(var, pushed_map):
        """Estimated candidate count for a vertex var after pushed filters."""
        total = 0.0
        for oid in vertex_tables[var]:
            live = store.collections[oid].live_count()
            sel = 1.0
            pred = pushed_map.get(var)
            if pred is not None:
                sel = estimate_selectivity(pred, stats_provider(oid))
            total += live * sel
        if var in size_hints:
            total = min(total, size_hints[var])
        return total

    # First pass: tentatively push everything pushable, pick the start.
    tentative_pushed, _ = split_push_defer(
        phi, stats_for_var, consts, push_enabled, range_cost_fn=lambda v, p: True
    )
    endpoint_vars = [v.var for v in pattern.vertices if pattern.degree(v.var) <= 1]
    if not endpoint_vars:
        endpoint_vars = [pattern.vertices[0].var]
    anchored = [
        v for v in endpoint_vars
        if v in tentative_pushed or v in phi or v in overlay_vertex_vars
    ]
    if not push_enabled:
        start_var = pattern.vertices[0].var
    elif len(anchored) == 1:
        start_var = anchored[0]
    elif len(anchored) >= 2:
        start_var = min(
            anchored,
            key=lambda v: (estimate_var(v, tentative_pushed), endpoint_vars.index(v)),
        )
    else:
        start_var = endpoint_vars[0]

    def build(pushed_map):
        return _plan_steps(pattern, start_var, store, vertex_tables, pushed_map,
                           elide_enabled, pruned_vars, overlay_vertex_vars,
                           overlay_edge_vars)

    def estimate_cost(pushed_map, steps):
        return _estimate_match_cost(pattern, start_var, store, vertex_tables, pushed_map,
                                    stats_provider, consts, steps, size_hints)

    # Range predicates: compare pushing vs deferring by the match cost.
    def range_decider(var, part):
        with_push = dict(tentative_pushed)
        with_push[var] = conjoin(
            [p for p in conjuncts(with_push.get(var)) if p is not part] + [part]
        )
        without = dict(tentative_pushed)
        remaining = [p for p in conjuncts(without.get(var, None)) if p is not part]
        if remaining:
            without[var] = conjoin(remaining)
        else:
            without.pop(var, None)
        cost_with = estimate_cost(with_push, build(with_push))
        cost_without = estimate_cost(without, build(without))
        return cost_with <= cost_without

    pushed, deferred = split_push_defer(phi, stats_for_var, consts, push_enabled, range_decider)
    steps = build(pushed)
    annotated = AnnotatedPattern(
        pattern=pattern,
        start_var=start_var,
        steps=steps,
        pushed=pushed,
        deferred=deferred,
        vertex_tables=vertex_tables,
        edge_oid=edge_oid,
    )
    annotated.est_rows = _estimate_match_rows(pattern, start_var, store, vertex_tables,
                                              pushed, stats_provider, size_hints)
    annotated.est_cost = estimate_cost(pushed, steps)
    return annotated


def _traversal_order(pattern, start_var):
    """Pattern edges in DFS order from the start; each entry is
    (edge, from_var, to_var, follows_direction)."""
    remaining = list(pattern.edges)
    order = []
    bound = {start_var}
    progress = True
    while remaining and progress:
        progress = False
        for e in list(remaining):
            if e.src in bound:
                order.append((e, e.src, e.dst, True))
                bound.add(e.dst)
            elif e.dst in bound:
                order.append((e, e.dst, e.src, False))
                bound.add(e.src)
            else:
                continue
            remaining.remove(e)
            progress = True
    if remaining:
        raise SchemaError("pattern is not connected")
    return order


def _plan_steps(pattern, start_var, store, vertex_tables, pushed, elide_enabled,
                pruned_vars, overlay_vertex_vars, overlay_edge_vars):
    steps = [Step(CASE_RECORDS_TO_NODES, var=start_var)]
    for edge, from_var, to_var, follows in _traversal_order(pattern, start_var):
        far_filtered = to_var in pushed or to_var in overlay_vertex_vars
        membership = True
        if not far_filtered:
            # The far-end label test can only fail when the edges' endpoint
            # tables are not covered by the far end's label tables.
            side_oids = store.target_oids() if follows else store.source_oids()
            covered = side_oids <= set(vertex_tables[to_var])
            if elide_enabled and covered:
                membership = False
        steps.append(
            Step(
                CASE_NODES_TO_NODES,
                var=to_var,
                src_var=from_var,
                forward=follows,
                membership=membership,
            )
        )
        edge_filtered = edge.var in pushed or edge.var in overlay_edge_vars
        steps.append(
            Step(
                CASE_NODES_TO_EDGES,
                var=edge.var,
                src_var=edge.src,
                dst_var=edge.dst,
                membership=edge_filtered,
                fetch=edge.var not in pruned_vars,
            )
        )
        steps.append(
            Step(CASE_NODES_TO_RECORDS, var=to_var, fetch=to_var not in pruned_vars)
        )
    return steps


def _estimate_flow(pattern, start_var, store, vertex_tables, pushed, stats_provider,
                   size_hints):
    """Estimated record counts flowing into each step, plus the output rows.

    Per-start fan-out multiplies by the average out-degree per hop and by
    the far end's membership fraction, capped so chains cannot explode
    the estimate.
    """
    universe = max(len(store.mappers.vertex_by_nid), 1)
    avg_deg = store.avg_out_degree()

    def var_size(var):
        total = 0.0
        for oid in vertex_tables[var]:
            live = store.collections[oid].live_count()
            sel = 1.0
            if var in pushed:
                sel = estimate_selectivity(pushed[var], stats_provider(oid))
            total += live * sel
        if var in size_hints:
            total = min(total, size_hints[var])
        return total

    n = var_size(start_var)
    flows = [(CASE_RECORDS_TO_NODES, n, start_var)]
    for edge, from_var, to_var, follows in _traversal_order(pattern, start_var):
        flows.append((CASE_NODES_TO_NODES, n, to_var))
        frac = min(var_size(to_var) / universe, 1.0)
        n = min(n * max(avg_deg, 0.0) * frac, LAMBDA_CAP)
        flows.append((CASE_NODES_TO_EDGES, n, edge.var))
        flows.append((CASE_NODES_TO_RECORDS, n, to_var))
    return flows, n


def _estimate_match_rows(pattern, start_var, store, vertex_tables, pushed, stats_provider,
                         size_hints):
    _, rows = _estimate_flow(pattern, start_var, store, vertex_tables, pushed,
                             stats_provider, size_hints)
    return rows


def _estimate_match_cost(pattern, start_var, store, vertex_tables, pushed, stats_provider,
                         consts, steps, size_hints):
    alpha = sum(1 for v in pushed if v in vertex_tables)
    beta = sum(1 for v in pushed if v not in vertex_tables)
    v_count = len(store.mappers.vertex_by_nid)
    e_count = store.forward.edge_count
    flows, rows = _estimate_flow(pattern, start_var, store, vertex_tables, pushed,
                                 stats_provider, size_hints)
    avg_deg = store.avg_out_degree()
    pruned = {s.var for s in steps if not s.fetch}
    traversal = 0.0
    for case, n, var in flows:
        if var in pruned and case in (CASE_NODES_TO_RECORDS, CASE_NODES_TO_EDGES):
            continue
        traversal += costmod.cost_traverse(case, n, avg_deg, consts)
    return costmod.cost_match(alpha, beta, v_count, e_count, traversal, rows, consts)


# -- execution ---------------------------------------------------------------


def match_pattern(view, annotated):
    """Run the planned step sequence and emit the binding relation."""
    store = view.store
    pattern = annotated.pattern
    vertex_tables = annotated.vertex_tables
    candidates = {}
    for pv in pattern.vertices:
        candidates[pv.var] = build_vertex_candidates(
            view,
            pv.var,
            vertex_tables[pv.var],
            annotated.pushed.get(pv.var),
            need_records=(pv.var == annotated.start_var),
        )
    for pe in pattern.edges:
        candidates[pe.var] = build_edge_candidates(
            view, pe.var, annotated.edge_oid, annotated.pushed.get(pe.var)
        )

    deferred_bound = {}
    for var, pred in annotated.deferred.items():
        oid = vertex_tables[var][0] if var in vertex_tables else annotated.edge_oid
        deferred_bound[var] = bind_to_schema(pred, store.collections[oid].schema)

    steps = annotated.steps
    stats = MatchStats(step_emissions=[0] * len(steps))
    columns = [v.var for v in pattern.vertices] + [e.var for e in pattern.edges]
    rows = []

    start_cands = candidates[annotated.start_var]
    start_entries = sorted(
        ((nid, entry) for nid, entry in start_cands.by_id.items()),
        key=lambda item: (item[1][0], item[1][1].tid),
    )
    stats.start_candidates = len(start_entries)

    def emit(binding):
        for var, pred in deferred_bound.items():
            bound = binding[var]
            if bound.record is None or not eval_predicate(pred, bound.record):
                return
        rows.append(tuple(binding.get(c) for c in columns))

    def expand(idx, binding):
        if idx == len(steps):
            emit(binding)
            return
        step = steps[idx]
        if step.case == CASE_RECORDS_TO_NODES:
            stats.step_emissions[idx] += 1
            expand(idx + 1, binding)
        elif step.case == CASE_NODES_TO_NODES:
            src = binding[step.src_var].nid
            cand = candidates[step.var]
            direction = FORWARD if step.forward else REVERSE
            for dst in store.neighbors(src, direction):
                entry = None
                if step.membership:
                    if cand.universal:
                        try:
                            oid = store.vertex_of(dst)[0]
                        except NotFoundError as exc:
                            raise ConsistencyError(str(exc)) from exc
                        if oid not in cand.tables:
                            continue
                    else:
                        entry = cand.by_id.get(dst)
                        if entry is None:
                            continue
                stats.step_emissions[idx] += 1
                nxt = dict(binding)
                if entry is not None:
                    nxt[step.var] = BoundVertex(dst, entry[0], entry[1], entry[2])
                else:
                    nxt[step.var] = BoundVertex(dst)
                expand(idx + 1, nxt)
        elif step.case == CASE_NODES_TO_EDGES:
            pair = (binding[step.src_var].nid, binding[step.dst_var].nid)
            cand = candidates[step.var]
            if not step.membership and not step.fetch:
                # pruned and unfiltered: the nid pair itself is the binding
                stats.step_emissions[idx] += 1
                nxt = dict(binding)
                nxt[step.var] = BoundEdge(pair)
                expand(idx + 1, nxt)
                return
            try:
                oid, tid = store.edge_of(*pair)
            except NotFoundError as exc:
                raise ConsistencyError(str(exc)) from exc
            record, ext = None, ()
            if step.membership and not cand.universal:
                entry = cand.by_id.get(tid)
                if entry is None:
                    return
                _, record, ext = entry
            elif step.fetch:
                record = store.collections[oid].fetch(tid)
            stats.step_emissions[idx] += 1
            nxt = dict(binding)
            nxt[step.var] = BoundEdge(pair, oid, record, ext)
            expand(idx + 1, nxt)
        elif step.case == CASE_NODES_TO_RECORDS:
            bound = binding[step.var]
            stats.step_emissions[idx] += 1
            if bound.record is None and step.fetch:
                try:
                    oid, record = store.fetch_vertex(bound.nid)
                except NotFoundError as exc:
                    raise ConsistencyError(str(exc)) from exc
                nxt = dict(binding)
                nxt[step.var] = BoundVertex(bound.nid, oid, record, bound.ext)
                expand(idx + 1, nxt)
            else:
                expand(idx + 1, binding)
        else:
            raise ContractError(f"unknown step case {step.case!r}")

    for nid, (oid, record, ext) in start_entries:
        expand(0, {annotated.start_var: BoundVertex(nid, oid, record, ext)})

    stats.rows = len(rows)
    ext_columns = {}
    for var, overlay in view.vertex_overlays.items():
        ext_columns[var] = list(overlay.columns)
    for var, overlay in view.edge_overlays.items():
        ext_columns[var] = list(overlay.columns)
    return GraphRelation(columns=columns, rows=rows, ext_columns=ext_columns, stats=stats)


# -- join-based matching (translation-style baseline) ------------------------


def match_by_joins(view, pattern, phi, catalog):
    """Pattern matching as hash-accelerated multi-way joins over the
    vertex and edge tables; the record access profile of a system that
    translates graph queries into relational joins."""
    store = view.store
    graphdef = store.graphdef
    vertex_tables = resolve_pattern_tables(pattern, graphdef, catalog)
    phi_bound = {}
    for var, pred in (phi or {}).items():
        oid = vertex_tables[var][0] if var in vertex_tables else graphdef.edge_oid
        phi_bound[var] = bind_to_schema(pred, store.collections[oid].schema)

    vertex_rows = {}
    for var, oids in vertex_tables.items():
        entries = {}
        for oid in oids:
            overlay = view.vertex_overlays.get(var)
            for record in store.collections[oid].scan():
                if overlay is not None and (oid, record.values[0]) not in overlay.entries:
                    continue
                if var in phi_bound and not eval_predicate(phi_bound[var], record):
                    continue
                if overlay is not None:
                    o, r, exts = overlay.entries[(oid, record.values[0])]
                    entries[(oid, record.values[0])] = (oid, r, tuple(exts))
                else:
                    entries[(oid, record.values[0])] = (oid, record, ())
        vertex_rows[var] = entries

    edge_by_src = {}
    edge_by_dst = {}
    edge_entries = {}
    edge_coll = store.collections[graphdef.edge_oid]
    for record in edge_coll.scan():
        soid, svid, toid, tvid = record.values[:4]
        edge_entries[record.tid] = record
        edge_by_src.setdefault((soid, svid), []).append(record)
        edge_by_dst.setdefault((toid, tvid), []).append(record)

    columns = [v.var for v in pattern.vertices] + [e.var for e in pattern.edges]
    first = pattern.vertices[0].var
    bindings = [
        {first: (key, entry)} for key, entry in sorted(vertex_rows[first].items())
    ]
    for edge, from_var, to_var, follows in _traversal_order(pattern, first):
        nxt = []
        for binding in bindings:
            key, _ = binding[from_var]
            matches = edge_by_src.get(key, []) if follows else edge_by_dst.get(key, [])
            for erec in matches:
                soid, svid, toid, tvid = erec.values[:4]
                far_key = (toid, tvid) if follows else (soid, svid)
                far = vertex_rows[to_var].get(far_key)
                if far is None:
                    continue
                if edge.var in phi_bound and not eval_predicate(phi_bound[edge.var], erec):
                    continue
                overlay = view.edge_overlays.get(edge.var)
                ext = ()
                if overlay is not None:
                    entry = overlay.entries.get(erec.tid)
                    if entry is None:
                        continue
                    _, erec, ext = entry
                new = dict(binding)
                new[to_var] = (far_key, far)
                new[edge.var] = (erec, ext)
                nxt.append(new)
        bindings = nxt

    rows = []
    for binding in bindings:
        cells = []
        for pv in pattern.vertices:
            key, (oid, record, ext) = binding[pv.var]
            cells.append(BoundVertex(store.nid_of(key), oid, record, ext))
        for pe in pattern.edges:
            erec, ext = binding[pe.var]
            src_nid = store.nid_of((erec.values[0], erec.values[1]))
            dst_nid = store.nid_of((erec.values[2], erec.values[3]))
            cells.append(BoundEdge((src_nid, dst_nid), graphdef.edge_oid, erec, ext))
        rows.append(tuple(cells))
    ext_columns = {}
    for var, overlay in view.vertex_overlays.items():
        ext_columns[var] = list(overlay.columns)
    for var, overlay in view.edge_overlays.items():
        ext_columns[var] = list(overlay.columns)
    return GraphRelation(columns=columns, rows=rows, ext_columns=ext_columns,
                         stats=MatchStats(rows=len(rows)))


# -- path search --------------------------------------------------------------


def shortest_path(store, src_key, dst_key):
    """Minimum-hop path over the forward adjacency graph, or None.

    Ties break deterministically by expanding smaller nids first.
    """
    src = store.nid_of(src_key)
    dst = store.nid_of(dst_key)
    if src == dst:
        return [src]
    parent = {src: None}
    frontier = [src]
    while frontier:
        nxt = []
        for nid in frontier:
            for nbr in sorted(store.neighbors(nid, FORWARD)):
                if nbr in parent:
                    continue
                parent[nbr] = nid
                if nbr == dst:
                    path = [nbr]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    return list(reversed(path))
                nxt.append(nbr)
        frontier = sorted(nxt)
    return None
