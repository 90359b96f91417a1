"""Value system, schemas, records, and the catalog.

Values are plain Python objects restricted to the engine's type set:
None, bool, int, float, str, dict (document), list (array). Records are
immutable once stored; every layer above shares them freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError

# Declared column types.
T_INT = "int"
T_FLOAT = "float"
T_TEXT = "text"
T_BOOL = "bool"
T_DOCUMENT = "document"
T_ARRAY = "array"

COLUMN_TYPES = (T_INT, T_FLOAT, T_TEXT, T_BOOL, T_DOCUMENT, T_ARRAY)

# Collection kinds.
K_RELATION = "relation"
K_DOCUMENTS = "documents"
K_VERTEX = "vertex"
K_EDGE = "edge"

EDGE_KEY_COLUMNS = ("soid", "svid", "toid", "tvid")
DOC_COLUMN = "doc"


def value_kind(v):
    """Classify a runtime value into the engine's type set."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return T_BOOL
    if isinstance(v, int):
        return T_INT
    if isinstance(v, float):
        return T_FLOAT
    if isinstance(v, str):
        return T_TEXT
    if isinstance(v, dict):
        return T_DOCUMENT
    if isinstance(v, list):
        return T_ARRAY
    raise SchemaError(f"unsupported value type: {type(v).__name__}")


def value_matches_type(v, declared):
    """Nulls are allowed in every column; ints are acceptable floats."""
    if v is None:
        return True
    kind = value_kind(v)
    if kind == declared:
        return True
    return declared == T_FLOAT and kind == T_INT


def compare_op(op, a, b):
    """Total comparison: Null operands and type mismatches yield False.

    Ints and floats compare numerically; text compares by code point;
    documents and arrays support only (in)equality.
    """
    if a is None or b is None:
        return False
    ka, kb = value_kind(a), value_kind(b)
    numeric = (T_INT, T_FLOAT)
    if ka in numeric and kb in numeric:
        pass  # mixed numeric comparison is fine
    elif ka != kb:
        return False
    elif ka in (T_DOCUMENT, T_ARRAY):
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        return False
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise SchemaError(f"unknown comparison operator {op!r}")


@dataclass(frozen=True)
class Record:
    """A stored row: a store-assigned tid plus schema-aligned values."""

    tid: int
    values: tuple

    def __len__(self):
        return len(self.values)


@dataclass
class Schema:
    """Shape of one collection; vertex/edge tables carry reserved key columns."""

    name: str
    oid: int
    kind: str
    columns: list  # list of (name, declared type)
    label: str = ""  # vertex/edge label, empty otherwise

    def __post_init__(self):
        if self.kind not in (K_RELATION, K_DOCUMENTS, K_VERTEX, K_EDGE):
            raise SchemaError(f"unknown collection kind {self.kind!r}")
        names = [c[0] for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column name in {self.name}")
        for cname, ctype in self.columns:
            if ctype not in COLUMN_TYPES:
                raise SchemaError(f"unknown column type {ctype!r} for {cname}")
        if self.kind == K_VERTEX and (not names or names[0] != "vid"):
            raise SchemaError(f"vertex table {self.name} must start with a vid column")
        if self.kind == K_EDGE and tuple(names[:4]) != EDGE_KEY_COLUMNS:
            raise SchemaError(
                f"edge table {self.name} must start with columns {EDGE_KEY_COLUMNS}"
            )

    @property
    def arity(self):
        return len(self.columns)

    def column_index(self, name):
        for i, (cname, _) in enumerate(self.columns):
            if cname == name:
                return i
        raise SchemaError(f"no column {name!r} in {self.name}")

    def column_names(self):
        return [c[0] for c in self.columns]

    def has_column(self, name):
        return any(c[0] == name for c in self.columns)

    def check_values(self, values):
        if len(values) != self.arity:
            raise SchemaError(
                f"{self.name}: expected {self.arity} values, got {len(values)}"
            )
        for (cname, ctype), v in zip(self.columns, values):
            if not value_matches_type(v, ctype):
                raise SchemaError(
                    f"{self.name}.{cname}: value {v!r} does not match type {ctype}"
                )


def make_document_schema(name, oid):
    """Document collections store one document per record in a single column."""
    return Schema(name=name, oid=oid, kind=K_DOCUMENTS, columns=[(DOC_COLUMN, T_DOCUMENT)])


def get_vertex_key(record, schema):
    """Composite key (oid, vid) of a vertex record."""
    if schema.kind != K_VERTEX:
        raise SchemaError(f"{schema.name} is not a vertex table")
    return (schema.oid, record.values[0])


def get_edge_key(record, schema):
    """Composite key (oid, soid, svid, toid, tvid) of an edge record."""
    if schema.kind != K_EDGE:
        raise SchemaError(f"{schema.name} is not an edge table")
    soid, svid, toid, tvid = record.values[:4]
    return (schema.oid, soid, svid, toid, tvid)


@dataclass
class GraphDef:
    """A named graph: vertex tables, one edge table, one shared edge label."""

    name: str
    vertex_oids: list
    edge_oid: int
    edge_label: str

    def topology_files(self):
        return (f"{self.name}.fwd.topo", f"{self.name}.rev.topo")


@dataclass
class Catalog:
    """All schemas and graph definitions, persisted as one JSON file."""

    schemas: dict = field(default_factory=dict)  # name -> Schema
    graphs: dict = field(default_factory=dict)  # name -> GraphDef
    next_oid: int = 0

    def add_schema(self, schema):
        if schema.name in self.schemas or schema.name in self.graphs:
            raise SchemaError(f"name {schema.name!r} already in catalog")
        if any(s.oid == schema.oid for s in self.schemas.values()):
            raise SchemaError(f"oid {schema.oid} already in catalog")
        self.schemas[schema.name] = schema

    def allocate_oid(self):
        oid = self.next_oid
        self.next_oid += 1
        return oid

    def add_graph(self, graphdef):
        if graphdef.name in self.graphs or graphdef.name in self.schemas:
            raise SchemaError(f"name {graphdef.name!r} already in catalog")
        for oid in list(graphdef.vertex_oids) + [graphdef.edge_oid]:
            if self.schema_by_oid(oid) is None:
                raise SchemaError(f"graph {graphdef.name}: unknown oid {oid}")
        edge_schema = self.schema_by_oid(graphdef.edge_oid)
        if edge_schema.kind != K_EDGE:
            raise SchemaError(f"graph {graphdef.name}: {edge_schema.name} is not an edge table")
        for oid in graphdef.vertex_oids:
            if self.schema_by_oid(oid).kind != K_VERTEX:
                raise SchemaError(f"graph {graphdef.name}: oid {oid} is not a vertex table")
        self.graphs[graphdef.name] = graphdef

    def schema_by_oid(self, oid):
        for s in self.schemas.values():
            if s.oid == oid:
                return s
        return None

    def schema(self, name):
        if name not in self.schemas:
            raise SchemaError(f"unknown collection {name!r}")
        return self.schemas[name]

    def graph(self, name):
        if name not in self.graphs:
            raise SchemaError(f"unknown graph {name!r}")
        return self.graphs[name]

    def vertex_tables_with_label(self, graphdef, label):
        return [
            self.schema_by_oid(oid)
            for oid in graphdef.vertex_oids
            if self.schema_by_oid(oid).label == label
        ]

    def to_json(self):
        return {
            "schemas": [
                {
                    "name": s.name,
                    "oid": s.oid,
                    "kind": s.kind,
                    "columns": [[c, t] for c, t in s.columns],
                    "label": s.label,
                }
                for s in self.schemas.values()
            ],
            "graphs": [
                {
                    "name": g.name,
                    "vertex_oids": list(g.vertex_oids),
                    "edge_oid": g.edge_oid,
                    "edge_label": g.edge_label,
                    "topology": list(g.topology_files()),
                }
                for g in self.graphs.values()
            ],
            "next_oid": self.next_oid,
        }

    def save(self, directory):
        path = Path(directory) / "catalog.json"
        path.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, directory):
        path = Path(directory) / "catalog.json"
        if not path.exists():
            return cls()
        data = json.loads(path.read_text(encoding="utf-8"))
        cat = cls(next_oid=data.get("next_oid", 0))
        for s in data["schemas"]:
            cat.schemas[s["name"]] = Schema(
                name=s["name"],
                oid=s["oid"],
                kind=s["kind"],
                columns=[tuple(c) for c in s["columns"]],
                label=s.get("label", ""),
            )
        for g in data["graphs"]:
            cat.graphs[g["name"]] = GraphDef(
                name=g["name"],
                vertex_oids=list(g["vertex_oids"]),
                edge_oid=g["edge_oid"],
                edge_label=g["edge_label"],
            )
        return cat
