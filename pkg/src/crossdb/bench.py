"""Benchmark harness: synthetic fixtures and mode-vs-mode comparisons.

Three execution modes mirror the engine ablation axes:

    full       - every optimization on (the default engine)
    no-opt     - optimizer disabled; matching runs purely topology-driven
                 with predicates applied after the fact
    join-emu   - pattern matching emulated as hash multi-way joins over
                 the vertex/edge tables (the translation-style baseline);
                 relational predicate pushdown stays on, graph-specific
                 rules stay off

Reports carry wall times (medians), record-fetch counters, and a hash
of the result multiset so modes can be checked for agreement.
"""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field

from .database import Database
from .executor import _hashable_row
from .model import T_FLOAT, T_INT, T_TEXT
from .optimizer import OptimizerOptions

MODES = ("full", "no-opt", "join-emu")


def mode_settings(mode):
    """(optimizer options, join_emulation flag) for one bench mode."""
    if mode == "full":
        return OptimizerOptions(), False
    if mode == "no-opt":
        return OptimizerOptions(enabled=False), False
    if mode == "join-emu":
        return (
            OptimizerOptions(
                enabled=True,
                predicate_pushdown=True,
                join_pushdown=False,
                rewriting=False,
                traversal_pruning=False,
            ),
            True,
        )
    raise ValueError(f"unknown bench mode {mode!r}")


def result_hash(result):
    digest = hashlib.sha256()
    for row in sorted(map(_hashable_row, result.rows)):
        digest.update(repr(row).encode("utf-8"))
    return digest.hexdigest()


def build_fixture(scale=1, seed=0, workers=1):
    """Synthetic e-commerce fixture: relations, documents, an interest graph.

    scale 1 is roughly 2k persons / 2k tags / 20k edges; scale 5 reaches
    the hundred-thousand-edge range.
    """
    rng = random.Random(seed)
    db = Database(workers=workers)
    persons = 2000 * scale
    tags = 2000 * scale
    edge_target = 20000 * scale

    db.create_table("Product", [("id", T_INT), ("title", T_TEXT), ("price", T_FLOAT)])
    db.create_table(
        "Customer", [("id", T_INT), ("person_id", T_INT), ("name", T_TEXT), ("spend", T_FLOAT)]
    )
    db.create_document_collection("Orders")
    db.create_vertex_table(
        "Persons", [("age", T_FLOAT), ("income", T_FLOAT), ("region", T_INT)], label="Persons"
    )
    db.create_vertex_table(
        "Tags", [("content", T_TEXT), ("popularity", T_FLOAT), ("food_flag", T_INT)],
        label="Tags",
    )
    db.create_edge_table("Interest_edges", [("weight", T_FLOAT)], label="Interested in")
    db.create_graph("Interested_in", ["Persons", "Tags"], "Interest_edges")

    db.insert(
        "Persons",
        [
            [i, 18.0 + rng.random() * 60, 1000.0 + rng.random() * 9000, rng.randrange(10)]
            for i in range(persons)
        ],
    )
    db.insert(
        "Tags",
        [
            [i, f"tag-{i}", rng.random(), 1 if rng.random() < 0.3 else 0]
            for i in range(tags)
        ],
    )
    person_oid = db.catalog.schema("Persons").oid
    tag_oid = db.catalog.schema("Tags").oid
    pairs = set()
    edges = []
    while len(edges) < edge_target:
        s = rng.randrange(persons)
        t = rng.randrange(tags)
        if (s, t) in pairs:
            continue
        pairs.add((s, t))
        edges.append([person_oid, s, tag_oid, t, round(rng.random(), 6)])
    db.insert("Interest_edges", edges)

    products = [[1, "Yogurt", 2.5], [2, "Milk", 1.5], [3, "Chess set", 20.0], [4, "Kettle", 35.0]]
    db.insert("Product", products)
    customers = [
        [10_000 + i, i, f"customer-{i}", round(rng.random() * 500, 2)]
        for i in range(min(persons, 500))
    ]
    db.insert("Customer", customers)
    orders = []
    for cid, _person, _name, _spend in customers:
        for _ in range(rng.randrange(3)):
            orders.append([{"customer_id": cid, "product_id": rng.choice(products)[0]}])
    if orders:
        db.insert("Orders", orders)
    return db


SUITES = ("default", "match", "cross-model")


def bench_queries(db, seed=0, suite="default"):
    """(name, query text) pairs the harness runs in every mode."""
    if suite not in SUITES:
        raise ValueError(f"unknown bench suite {suite!r}; pick one of {SUITES}")
    rng = random.Random(seed + 17)
    tag_count = db.collection("Tags").live_count()
    pick = rng.randrange(tag_count)
    queries = [
        (
            "selective-match",
            "SELECT p.vid, t.vid FROM Interested_in "
            "MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
            f"WHERE t.content = 'tag-{pick}'",
        ),
        (
            "cross-model",
            "SELECT C.id, t.vid FROM Customer C, Interested_in "
            "MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
            f"WHERE C.person_id = p.vid AND t.content = 'tag-{pick}' AND C.spend < 400.0",
        ),
        (
            "topology-projection",
            "SELECT p.vid, t.vid FROM Interested_in "
            "MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
            f"WHERE t.content = 'tag-{pick}'",
        ),
    ]
    if suite == "match":
        return queries[:1]
    if suite == "cross-model":
        return queries[1:2]
    return queries


@dataclass
class BenchEntry:
    query: str
    mode: str
    median_seconds: float
    fetches: int
    rows: int
    digest: str


@dataclass
class BenchReport:
    scale: int
    seed: int
    suite: str = "default"
    entries: list = field(default_factory=list)

    def entry(self, query, mode):
        for e in self.entries:
            if e.query == query and e.mode == mode:
                return e
        return None

    def hashes_agree(self):
        by_query = {}
        for e in self.entries:
            by_query.setdefault(e.query, set()).add(e.digest)
        return all(len(v) == 1 for v in by_query.values())

    def format_text(self):
        if not self.entries:
            return f"bench suite={self.suite} scale={self.scale}: empty report"
        lines = [f"bench suite={self.suite} scale={self.scale} seed={self.seed}"]
        width = max(len(e.query) for e in self.entries)
        for e in self.entries:
            lines.append(
                f"  {e.query:<{width}}  {e.mode:<8}  "
                f"{e.median_seconds * 1000:9.2f} ms  fetches={e.fetches:<9d} "
                f"rows={e.rows:<6d} hash={e.digest[:12]}"
            )
        lines.append(f"  result hashes agree across modes: {self.hashes_agree()}")
        return "\n".join(lines)


def run_query_mode(db, text, mode, runs=3):
    """Median wall time plus the fetch count of one (query, mode) pair."""
    options, emulate = mode_settings(mode)
    times = []
    fetches = 0
    result = None
    for _ in range(runs):
        before = db.counters.record_fetches()
        t0 = time.perf_counter()
        result = db.query(text, options=options, join_emulation=emulate)
        times.append(time.perf_counter() - t0)
        fetches = db.counters.record_fetches() - before
    times.sort()
    return times[len(times) // 2], fetches, result


def run_bench(suite="default", scale=1, seed=0, runs=3, workers=1):
    if suite not in SUITES:
        raise ValueError(f"unknown bench suite {suite!r}; pick one of {SUITES}")
    report = BenchReport(scale=scale, seed=seed, suite=suite)
    if scale <= 0:
        return report
    db = build_fixture(scale=scale, seed=seed, workers=workers)
    for name, text in bench_queries(db, seed=seed, suite=suite):
        for mode in MODES:
            median, fetches, result = run_query_mode(db, text, mode, runs=runs)
            report.entries.append(
                BenchEntry(
                    query=name,
                    mode=mode,
                    median_seconds=median,
                    fetches=fetches,
                    rows=result.row_count,
                    digest=result_hash(result),
                )
            )
    return report
