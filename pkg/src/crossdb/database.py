"""Embedded database facade: catalog, storage, graphs, queries, analytics.

A Database owns one directory (or runs fully in memory), opens every
cataloged collection, loads graph topologies on first use, and routes
mutations so the record store and topology store stay consistent.
"""

from __future__ import annotations

from pathlib import Path

from .cost import CostConstants
from .errors import SchemaError
from .executor import ExecutionContext, execute
from .model import (
    Catalog,
    GraphDef,
    K_DOCUMENTS,
    K_EDGE,
    K_RELATION,
    K_VERTEX,
    Schema,
    T_INT,
    make_document_schema,
)
from .optimizer import OptimizerOptions, optimize
from .parser import AnalyzeStatement, SelectQuery, parse
from .plan import build_logical_plan
from .stats import collect_stats
from .store import (
    AccessCounters,
    Collection,
    export_csv,
    export_jsonl,
    import_csv,
    import_jsonl,
)
from .topology import GraphCache


class Database:
    def __init__(self, directory=None, consts=None, workers=1,
                 buffer_budget=64 * 1024 * 1024, row_buffer=4096,
                 optimizer=None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.consts = consts or CostConstants()
        self.workers = workers
        self.optimizer_options = optimizer or OptimizerOptions()
        self.counters = AccessCounters()
        self.catalog = Catalog.load(self.directory) if self.directory else Catalog()
        self.collections = {}
        self._by_oid = {}
        self.row_buffer = row_buffer
        for schema in self.catalog.schemas.values():
            self._open_collection(schema)
        self.graphs = GraphCache(self.catalog, self._by_oid, self.directory)
        self._stats_cache = {}
        from .pipeline import MatrixBuffer  # local import avoids a cycle

        self.matrix_buffer = MatrixBuffer(buffer_budget)

    # -- lifecycle -----------------------------------------------------------

    def _open_collection(self, schema):
        log_path = None
        if self.directory is not None:
            log_path = self.directory / f"{schema.name}.log"
        coll = Collection(schema, log_path=log_path, counters=self.counters,
                          buffer_capacity=self.row_buffer)
        self.collections[schema.name] = coll
        self._by_oid[schema.oid] = coll
        return coll

    def save(self):
        if self.directory is not None:
            self.catalog.save(self.directory)
            self.graphs.save_all()

    def close(self):
        self.save()
        for coll in self.collections.values():
            coll.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- DDL ----------------------------------------------------------------

    def create_table(self, name, columns):
        schema = Schema(name=name, oid=self.catalog.allocate_oid(),
                        kind=K_RELATION, columns=list(columns))
        self.catalog.add_schema(schema)
        self.save_catalog()
        return self._open_collection(schema)

    def create_document_collection(self, name):
        schema = make_document_schema(name, self.catalog.allocate_oid())
        self.catalog.add_schema(schema)
        self.save_catalog()
        return self._open_collection(schema)

    def create_vertex_table(self, name, prop_columns, label):
        columns = [("vid", T_INT)] + list(prop_columns)
        schema = Schema(name=name, oid=self.catalog.allocate_oid(),
                        kind=K_VERTEX, columns=columns, label=label)
        self.catalog.add_schema(schema)
        self.save_catalog()
        return self._open_collection(schema)

    def create_edge_table(self, name, prop_columns, label):
        columns = [("soid", T_INT), ("svid", T_INT), ("toid", T_INT), ("tvid", T_INT)]
        columns += list(prop_columns)
        schema = Schema(name=name, oid=self.catalog.allocate_oid(),
                        kind=K_EDGE, columns=columns, label=label)
        self.catalog.add_schema(schema)
        self.save_catalog()
        return self._open_collection(schema)

    def create_graph(self, name, vertex_tables, edge_table):
        vertex_oids = [self.catalog.schema(t).oid for t in vertex_tables]
        edge_schema = self.catalog.schema(edge_table)
        for g in self.catalog.graphs.values():
            if g.edge_oid == edge_schema.oid:
                raise SchemaError(f"edge table {edge_table!r} already belongs to graph {g.name!r}")
        graphdef = GraphDef(name=name, vertex_oids=vertex_oids,
                            edge_oid=edge_schema.oid, edge_label=edge_schema.label)
        self.catalog.add_graph(graphdef)
        self.save_catalog()
        return graphdef

    def save_catalog(self):
        if self.directory is not None:
            self.catalog.save(self.directory)

    # -- lookups ---------------------------------------------------------------

    def collection(self, name):
        if name not in self.collections:
            raise SchemaError(f"unknown collection {name!r}")
        return self.collections[name]

    def collection_by_oid(self, oid):
        if oid not in self._by_oid:
            raise SchemaError(f"unknown collection oid {oid}")
        return self._by_oid[oid]

    def schema_by_oid(self, oid):
        return self.collection_by_oid(oid).schema

    def graph_store(self, name):
        return self.graphs.get(name)

    def graphs_containing(self, oid):
        out = []
        for g in self.catalog.graphs.values():
            if oid in g.vertex_oids or oid == g.edge_oid:
                out.append(g)
        return out

    def stats(self, oid):
        coll = self.collection_by_oid(oid)
        cached = self._stats_cache.get(oid)
        if cached is not None and cached[0] == coll.version:
            return cached[1]
        stats = collect_stats(coll)
        self._stats_cache[oid] = (coll.version, stats)
        return stats

    # -- mutations (dual-store routing) ---------------------------------------------

    def insert(self, name, rows):
        coll = self.collection(name)
        schema = coll.schema
        graphs = self.graphs_containing(schema.oid)
        if not graphs:
            return coll.insert(rows)
        if schema.kind == K_VERTEX:
            stores = [self.graph_store(g.name) for g in graphs]
            rows = [tuple(r) for r in rows]
            seen = set()
            for values in rows:
                key = (schema.oid, values[0])
                if key in seen:
                    raise SchemaError(f"duplicate vertex key {key} in one batch")
                seen.add(key)
                for store in stores:
                    if key in store.mappers.nid_by_key:
                        raise SchemaError(
                            f"duplicate vertex key {key} in {store.graphdef.name}"
                        )
            tids = coll.insert(rows)
            for store in stores:
                store.register_vertices(schema.oid, tids)
            return tids
        if schema.kind == K_EDGE:
            return self.graph_store(graphs[0].name).insert_edges(rows)
        return coll.insert(rows)

    def update(self, name, tid, values):
        coll = self.collection(name)
        schema = coll.schema
        if schema.kind in (K_VERTEX, K_EDGE) and self.graphs_containing(schema.oid):
            old = coll.fetch(tid)
            key_width = 1 if schema.kind == K_VERTEX else 4
            if tuple(values[:key_width]) != old.values[:key_width]:
                raise SchemaError("key columns of graph records cannot change; delete and reinsert")
        coll.update(tid, values)

    def delete(self, name, tid):
        coll = self.collection(name)
        schema = coll.schema
        graphs = self.graphs_containing(schema.oid)
        if not graphs:
            return coll.delete(tid)
        record = coll.fetch(tid)
        if schema.kind == K_VERTEX:
            key = (schema.oid, record.values[0])
            for g in graphs:
                self.graph_store(g.name).detach_vertex(key)
            coll.delete(tid)
            return
        if schema.kind == K_EDGE:
            self.graph_store(graphs[0].name).delete_edge(record.values[:4])
            return
        coll.delete(tid)

    # -- import / export --------------------------------------------------------------

    def import_path(self, name, path):
        coll = self.collection(name)
        schema = coll.schema
        graphs = self.graphs_containing(schema.oid)
        if not graphs:
            if schema.kind == K_DOCUMENTS:
                return import_jsonl(coll, path)
            return import_csv(coll, path)
        # graph tables route through the dual-store protocol
        from .store import read_csv_rows

        rows = read_csv_rows(schema, path)
        return self.insert(name, rows)

    def export_path(self, name, path):
        coll = self.collection(name)
        if coll.schema.kind == K_DOCUMENTS:
            export_jsonl(coll, path)
        else:
            export_csv(coll, path)

    # -- queries ------------------------------------------------------------------------

    def plan(self, text_or_ast, options=None):
        ast = parse(text_or_ast) if isinstance(text_or_ast, str) else text_or_ast
        if not isinstance(ast, SelectQuery):
            raise SchemaError("use analyze() for ANALYZE statements")
        logical = build_logical_plan(ast, self.catalog)
        physical = optimize(logical, self, self.consts,
                            options or self.optimizer_options)
        return logical, physical

    def query(self, text, options=None, join_emulation=False):
        _, physical = self.plan(text, options)
        ctx = ExecutionContext(db=self, consts=self.consts, join_emulation=join_emulation)
        return execute(physical, ctx)

    def execute_plan(self, physical, join_emulation=False):
        ctx = ExecutionContext(db=self, consts=self.consts, join_emulation=join_emulation)
        return execute(physical, ctx)

    def explain(self, text, options=None):
        _, physical = self.plan(text, options)
        return physical.explain()

    def analyze(self, text_or_stmt, options=None):
        from .pipeline import run_analysis

        stmt = parse(text_or_stmt) if isinstance(text_or_stmt, str) else text_or_stmt
        if not isinstance(stmt, AnalyzeStatement):
            raise SchemaError("analyze() expects an ANALYZE statement")
        return run_analysis(self, stmt, options or self.optimizer_options)

    # -- maintenance ----------------------------------------------------------------------

    def audit(self):
        reports = []
        for name in sorted(self.catalog.graphs):
            reports.append(self.graph_store(name).audit())
        return reports

    def collection_versions(self, names):
        out = {}
        for name in names:
            out[name] = self.collection(name).version
        return out
