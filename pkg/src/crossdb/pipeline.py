"""Analytics pipeline: plan fingerprints, the matrix buffer, invocation
planning, and ANALYZE statement execution.

Query results are materialized as matrices keyed by a fingerprint of
the canonicalized logical plan; semantically identical queries (same
plan after variable renaming and conjunct sorting) share one
materialization as long as their source collections are unchanged.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass, field

from .analytics import (
    Matrix,
    RegressionParams,
    cosine_similarity,
    logistic_regression,
    multiply,
    rel2matrix,
)
from .errors import ContractError, SchemaError
from .plan import (
    CollectionLeaf,
    GraphProject,
    JoinOp,
    MatchOp,
    ProjectOp,
    SelectOp,
    TrimmedScan,
    build_logical_plan,
    find_nodes,
)
from .predicates import format_expr, map_refs
from dataclasses import replace as _dc_replace


# -- fingerprints ------------------------------------------------------------------


def _rename_map(plan):
    """Positional variable names make alias choices irrelevant."""
    mapping = {}
    for leaf in find_nodes(plan, CollectionLeaf):
        if leaf.alias not in mapping:
            mapping[leaf.alias] = f"s{len(mapping)}"
    for gp in find_nodes(plan, GraphProject):
        for v in gp.child.pattern.vertices:
            mapping[v.var] = f"q{len(mapping)}"
        for e in gp.child.pattern.edges:
            mapping[e.var] = f"q{len(mapping)}"
    for ts in find_nodes(plan, TrimmedScan):
        if ts.var not in mapping:
            mapping[ts.var] = f"q{len(mapping)}"
    return mapping


def canonical_plan_text(plan):
    mapping = _rename_map(plan)

    def ren(expr):
        return map_refs(
            expr,
            lambda r: _dc_replace(r, qualifier=mapping.get(r.qualifier, r.qualifier)),
        )

    def fmt(expr):
        return format_expr(ren(expr))

    def walk(node):
        if isinstance(node, ProjectOp):
            items = "*" if node.items is None else ",".join(fmt(i.expr) for i in node.items)
            return f"project([{items}],{walk(node.child)})"
        if isinstance(node, SelectOp):
            parts = ",".join(sorted(fmt(c) for c in node.conjuncts))
            return f"select([{parts}],{walk(node.child)})"
        if isinstance(node, JoinOp):
            parts = ",".join(sorted(fmt(p) for p in node.preds))
            return f"join([{parts}],{walk(node.left)},{walk(node.right)})"
        if isinstance(node, GraphProject):
            cols = "*"
            if node.columns is not None:
                cols = ",".join(sorted(f"{mapping.get(v, v)}.{c}" for v, c in node.columns))
            return f"gproject([{cols}],{walk(node.child)})"
        if isinstance(node, MatchOp):
            verts = ";".join(f"{mapping[v.var]}:{v.label}" for v in node.pattern.vertices)
            edges = ";".join(
                f"{mapping[e.var]}:{e.label}:{mapping[e.src]}->{mapping[e.dst]}"
                for e in node.pattern.edges
            )
            phi = ",".join(
                f"{mapping.get(v, v)}={fmt(p)}" for v, p in sorted(node.phi.items())
            )
            pushed = ",".join(
                f"{mapping.get(pj.target_var, pj.target_var)}<-{walk(pj.subplan)}|{fmt(pj.pred)}"
                for pj in node.pushed_joins
            )
            return f"match({node.graph.name},[{verts}],[{edges}],[{phi}],[{pushed}])"
        if isinstance(node, TrimmedScan):
            pred = fmt(node.pred) if node.pred is not None else ""
            return f"tscan({mapping.get(node.var, node.var)},{node.oids},[{pred}])"
        if isinstance(node, CollectionLeaf):
            return f"coll({node.name} as {mapping[node.alias]})"
        raise SchemaError(f"cannot fingerprint {type(node).__name__}")

    return walk(plan)


def plan_fingerprint(plan):
    return hashlib.sha256(canonical_plan_text(plan).encode("utf-8")).hexdigest()


def plan_source_names(plan, catalog):
    """Names of every collection the plan reads (graph tables included)."""
    names = set()
    for leaf in find_nodes(plan, CollectionLeaf):
        names.add(leaf.name)
    for gp in find_nodes(plan, GraphProject):
        gd = gp.child.graph.graphdef
        for oid in list(gd.vertex_oids) + [gd.edge_oid]:
            names.add(catalog.schema_by_oid(oid).name)
    for ts in find_nodes(plan, TrimmedScan):
        for oid in ts.oids:
            names.add(catalog.schema_by_oid(oid).name)
    return sorted(names)


# -- the matrix buffer ------------------------------------------------------------------


class MatrixBuffer:
    """LRU matrix cache keyed by plan fingerprint; entries are valid only
    while every source collection's version counter is unchanged.
    Lookups and puts share one lock (concurrent readers are cheap and
    puts are exclusive)."""

    def __init__(self, budget_bytes=64 * 1024 * 1024):
        import threading

        self.budget = budget_bytes
        self._entries = OrderedDict()  # fingerprint -> (matrix, versions)
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def size_bytes(self):
        return sum(m.nbytes for m, _ in self._entries.values())

    def lookup(self, fingerprint, current_versions):
        with self._lock:
            entry = self._entries.get(fingerprint)
            if entry is None:
                self.misses += 1
                return None
            matrix, versions = entry
            for name, version in versions.items():
                if current_versions.get(name) != version:
                    del self._entries[fingerprint]  # stale: a source mutated
                    self.misses += 1
                    return None
            self._entries.move_to_end(fingerprint)
            self.hits += 1
            return matrix

    def put(self, fingerprint, matrix, versions):
        with self._lock:
            self._entries[fingerprint] = (matrix, dict(versions))
            self._entries.move_to_end(fingerprint)
            while len(self._entries) > 1 and self.size_bytes() > self.budget:
                self._entries.popitem(last=False)


# -- invocation planning ------------------------------------------------------------------


@dataclass
class PipelineStep:
    step_id: str
    kind: str  # 'materialize' | 'rel2matrix' | 'multiply' | 'similarity' | 'regression'
    inputs: list = field(default_factory=list)  # upstream step ids
    detail: dict = field(default_factory=dict)


@dataclass
class PipelinePlan:
    steps: list

    def ordered(self):
        """Steps in dependency order; cycles and unbound inputs fail."""
        by_id = {s.step_id: s for s in self.steps}
        for s in self.steps:
            for dep in s.inputs:
                if dep not in by_id:
                    raise ContractError(f"step {s.step_id} reads undefined input {dep}")
        state = {}
        out = []

        def visit(sid):
            if state.get(sid) == "done":
                return
            if state.get(sid) == "visiting":
                raise ContractError(f"pipeline has a dependency cycle at {sid}")
            state[sid] = "visiting"
            for dep in by_id[sid].inputs:
                visit(dep)
            state[sid] = "done"
            out.append(by_id[sid])

        for s in self.steps:
            visit(s.step_id)
        return out


def plan_pipeline(stmt, logical_plans):
    """Invocation plan for one ANALYZE statement: materialize each distinct
    source query once, convert to matrices, then run the operator."""
    steps = []
    matrix_ids = []
    seen = {}
    for logical in logical_plans:
        fp = plan_fingerprint(logical)
        if fp in seen:
            matrix_ids.append(seen[fp])
            continue
        mat_id = f"materialize:{fp[:12]}"
        steps.append(PipelineStep(mat_id, "materialize", [], {"fingerprint": fp}))
        conv_id = f"rel2matrix:{fp[:12]}"
        steps.append(PipelineStep(conv_id, "rel2matrix", [mat_id], {}))
        seen[fp] = conv_id
        matrix_ids.append(conv_id)
    steps.append(
        PipelineStep(
            f"op:{stmt.operator.lower()}",
            stmt.operator.lower(),
            list(matrix_ids),
            {"params": dict(stmt.params)},
        )
    )
    plan = PipelinePlan(steps)
    plan.ordered()  # validates now
    return plan


# -- ANALYZE execution ----------------------------------------------------------------------


@dataclass
class AnalysisResult:
    operator: str
    matrix: Matrix | None = None
    regression: object = None
    pipeline: PipelinePlan | None = None
    reused: list = field(default_factory=list)  # per input query: buffer hit?
    fingerprints: list = field(default_factory=list)
    baseline_loss: float | None = None


def _materialize_matrix(db, logical, options):
    from .optimizer import optimize

    physical = optimize(logical, db, db.consts, options)
    result = db.execute_plan(physical)
    return rel2matrix(result)


def source_matrix(db, logical, options):
    """Matrix for one query, through the buffer when valid."""
    fp = plan_fingerprint(logical)
    names = plan_source_names(logical, db.catalog)
    versions = db.collection_versions(names)
    cached = db.matrix_buffer.lookup(fp, versions)
    if cached is not None:
        return fp, cached, True
    matrix = _materialize_matrix(db, logical, options)
    db.matrix_buffer.put(fp, matrix, versions)
    return fp, matrix, False


def run_analysis(db, stmt, options):
    logicals = [build_logical_plan(q, db.catalog) for q in stmt.queries]
    pipeline = plan_pipeline(stmt, logicals)
    matrices = []
    reused = []
    fingerprints = []
    for logical in logicals:
        fp, matrix, hit = source_matrix(db, logical, options)
        matrices.append(matrix)
        reused.append(hit)
        fingerprints.append(fp)
    result = AnalysisResult(
        operator=stmt.operator, pipeline=pipeline, reused=reused, fingerprints=fingerprints
    )
    params = dict(stmt.params)
    if stmt.operator == "MULTIPLY":
        if len(matrices) != 2:
            raise ContractError("MULTIPLY needs USING (...) AND (...)")
        result.matrix = multiply(matrices[0], matrices[1], workers=db.workers)
    elif stmt.operator == "SIMILARITY":
        right = matrices[1] if len(matrices) > 1 else matrices[0]
        result.matrix = cosine_similarity(matrices[0], right, workers=db.workers)
    elif stmt.operator == "REGRESSION":
        if len(matrices) != 1:
            raise ContractError("REGRESSION takes exactly one source query")
        label = params.pop("label", None)
        if label is None:
            raise ContractError("REGRESSION needs WITH (label='column')")
        mat = matrices[0]
        if mat.col_labels is None or label not in mat.col_labels:
            raise ContractError(f"label column {label!r} not in the query output")
        li = mat.col_labels.index(label)
        y = mat.data[:, li]
        keep = [i for i in range(mat.cols) if i != li]
        features = Matrix(mat.data[:, keep],
                          col_labels=[mat.col_labels[i] for i in keep])
        reg_params = RegressionParams(
            learning_rate=float(params.pop("rate", 0.1)),
            max_iterations=int(params.pop("iterations", 100)),
            tolerance=float(params.pop("tolerance", 1e-6)),
            l2=float(params.pop("l2", 0.0)),
            standardize=bool(params.pop("standardize", False)),
        )
        if params:
            raise ContractError(f"unknown REGRESSION parameters {sorted(params)}")
        result.regression = logistic_regression(features, y, reg_params, workers=db.workers)
        result.baseline_loss = intercept_only_loss(y)
    else:
        raise ContractError(f"unknown analysis operator {stmt.operator!r}")
    return result


def intercept_only_loss(y):
    """Log-loss of always predicting the label mean (the null model)."""
    import numpy as np

    n = y.shape[0]
    p = float(y.mean()) if n else 0.5
    eps = 1e-12
    p = min(max(p, eps), 1 - eps)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())
