"""Shared fixture builders: small multi-model databases and random graphs."""

from __future__ import annotations

import random

import pytest

from crossdb import Database
from crossdb.model import T_FLOAT, T_INT, T_TEXT


def build_yogurt_db(workers=1):
    """Seeded e-commerce fixture: 4 customers, 3 products (one Yogurt),
    5 orders, and a 6-vertex interest graph (3 persons, 3 tags)."""
    db = Database(workers=workers)
    db.create_table("Product", [("id", T_INT), ("title", T_TEXT), ("price", T_FLOAT)])
    db.create_table("Customer", [("id", T_INT), ("person_id", T_INT), ("name", T_TEXT)])
    db.create_document_collection("Orders")
    db.create_vertex_table(
        "Persons", [("name", T_TEXT), ("age", T_FLOAT), ("income", T_FLOAT)], label="Persons"
    )
    db.create_vertex_table(
        "Tags", [("content", T_TEXT), ("food_flag", T_INT)], label="Tags"
    )
    db.create_edge_table("Interest_edges", [("weight", T_FLOAT)], label="Interested in")
    db.create_graph("Interested_in", ["Persons", "Tags"], "Interest_edges")

    db.insert("Product", [[1, "Yogurt", 2.5], [2, "Milk", 1.5], [3, "Chess set", 20.0]])
    db.insert(
        "Customer",
        [[10, 0, "ann"], [11, 1, "bob"], [12, 2, "cyn"], [13, 0, "dee"]],
    )
    db.insert(
        "Orders",
        [
            [{"customer_id": 10, "product_id": 1}],
            [{"customer_id": 11, "product_id": 1}],
            [{"customer_id": 11, "product_id": 2}],
            [{"customer_id": 12, "product_id": 3}],
            [{"customer_id": 13, "product_id": 2}],
        ],
    )
    db.insert(
        "Persons",
        [[0, "ann", 31.0, 1200.0], [1, "bob", 42.0, 900.0], [2, "cyn", 25.0, 2100.0]],
    )
    db.insert(
        "Tags", [[0, "food", 1], [1, "sport", 0], [2, "music", 0]]
    )
    person_oid = db.catalog.schema("Persons").oid
    tag_oid = db.catalog.schema("Tags").oid
    db.insert(
        "Interest_edges",
        [
            [person_oid, 0, tag_oid, 0, 0.9],
            [person_oid, 1, tag_oid, 0, 0.5],
            [person_oid, 1, tag_oid, 1, 0.2],
            [person_oid, 2, tag_oid, 2, 0.8],
        ],
    )
    return db


# Hand enumeration for the Yogurt query on the fixture above:
#   Yogurt (product 1) was ordered by customers 10 (person 0) and 11 (person 1);
#   person 0 -> food, person 1 -> food and sport.
YOGURT_QUERY = (
    "SELECT C.id, t.vid FROM Product P, Orders O, Customer C, Interested_in "
    "MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
    "WHERE C.person_id = p.vid AND P.id = O->>'product_id' "
    "AND O->>'customer_id' = C.id AND P.title = 'Yogurt'"
)
YOGURT_EXPECTED = [(10, 0), (11, 0), (11, 1)]


@pytest.fixture
def yogurt_db():
    db = build_yogurt_db()
    yield db
    db.close()


def build_random_graph_db(rng, n_vertices=None, n_edges=None, two_tables=True,
                          contents=4):
    """A graph database with random topology and small attribute domains.

    Returns (db, graph name). Vertex tables: A (and B when two_tables),
    each with columns (vid, num, tag); edges carry a numeric weight.
    """
    if n_vertices is None:
        n_vertices = rng.randint(2, 100)
    if n_edges is None:
        n_edges = rng.randint(0, min(500, n_vertices * n_vertices))
    db = Database()
    db.create_vertex_table("A", [("num", T_INT), ("tag", T_TEXT)], label="A")
    labels = {"A": "A"}
    if two_tables:
        db.create_vertex_table("B", [("num", T_INT), ("tag", T_TEXT)], label="B")
        labels["B"] = "B"
    db.create_edge_table("E", [("weight", T_FLOAT), ("kind", T_INT)], label="linked")
    db.create_graph("G", list(labels), "E")
    a_oid = db.catalog.schema("A").oid
    oids = [a_oid]
    split = n_vertices if not two_tables else rng.randint(1, n_vertices - 1)
    rows_a = [[i, rng.randrange(contents), f"c{rng.randrange(contents)}"] for i in range(split)]
    db.insert("A", rows_a)
    vertex_keys = [(a_oid, i) for i in range(split)]
    if two_tables:
        b_oid = db.catalog.schema("B").oid
        oids.append(b_oid)
        rows_b = [
            [i, rng.randrange(contents), f"c{rng.randrange(contents)}"]
            for i in range(n_vertices - split)
        ]
        db.insert("B", rows_b)
        vertex_keys += [(b_oid, i) for i in range(n_vertices - split)]
    pairs = set()
    edges = []
    attempts = 0
    while len(edges) < n_edges and attempts < n_edges * 10 + 50:
        attempts += 1
        s = rng.choice(vertex_keys)
        t = rng.choice(vertex_keys)
        if (s, t) in pairs:
            continue
        pairs.add((s, t))
        edges.append([s[0], s[1], t[0], t[1], round(rng.random(), 4), rng.randrange(contents)])
    if edges:
        db.insert("E", edges)
    return db, "G"
