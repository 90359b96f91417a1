"""Graph topology storage: adjacency graphs, record mappers, and mutation.

The topology of each graph lives apart from its vertex/edge records as a
pair of adjacency graphs (forward and reverse) over dense node ids
(nids). Three mappers bridge the two stores:

    nid_of:    (oid, vid)      -> nid
    vertex_of: nid             -> (oid, tid)
    edge_of:   (nid_s, nid_t)  -> (oid, tid)

Mutations follow a staged protocol: topology and mapper entries are
adjusted first, then records are written/tombstoned, so the dual stores
never disagree in a way the audit can observe.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .errors import FormatError, NotFoundError, SchemaError
from .model import get_vertex_key

MAGIC = b"GRDO"
FORMAT_VERSION = 1
FORWARD = 0
REVERSE = 1


class AdjacencyGraph:
    """List-based topology: per-source neighbor sequences in insertion order."""

    def __init__(self, direction=FORWARD):
        self.direction = direction
        self.targets = []  # nid -> list of neighbor nids
        self.edge_count = 0

    @property
    def node_count(self):
        return len(self.targets)

    def add_node(self):
        self.targets.append([])
        return len(self.targets) - 1

    def ensure_node(self, nid):
        while len(self.targets) <= nid:
            self.targets.append([])

    def add_edge(self, src, dst):
        self.ensure_node(max(src, dst))
        self.targets[src].append(dst)
        self.edge_count += 1

    def remove_edge(self, src, dst):
        self.targets[src].remove(dst)
        self.edge_count -= 1

    def neighbors(self, nid):
        if nid < 0 or nid >= len(self.targets):
            raise NotFoundError(f"no topology node {nid}")
        return iter(self.targets[nid])

    def degree(self, nid):
        return len(self.targets[nid])

    def pairs(self):
        for src, row in enumerate(self.targets):
            for dst in row:
                yield (src, dst)

    def structurally_equal(self, other):
        return (
            self.direction == other.direction
            and self.edge_count == other.edge_count
            and self.targets == other.targets
        )


def serialize(graph, edge_locations=None):
    """Binary form: GRDO magic, version, direction, CSR offsets/targets,
    then (nid_s, nid_t, oid, tid) entries locating each edge record."""
    edge_locations = edge_locations or {}
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<B", graph.direction)
    out += struct.pack("<Q", graph.node_count)
    out += struct.pack("<Q", graph.edge_count)
    offset = 0
    offsets = [0]
    flat = []
    for row in graph.targets:
        offset += len(row)
        offsets.append(offset)
        flat.extend(row)
    out += struct.pack(f"<{len(offsets)}Q", *offsets)
    if flat:
        out += struct.pack(f"<{len(flat)}Q", *flat)
    for (src, dst), (oid, tid) in sorted(edge_locations.items()):
        out += struct.pack("<QQIQ", src, dst, oid, tid)
    return bytes(out)


def deserialize(data):
    """Inverse of serialize; returns (AdjacencyGraph, edge location map)."""
    view = memoryview(data)
    if len(view) < 25:
        raise FormatError("topology data truncated before header")
    if bytes(view[:4]) != MAGIC:
        raise FormatError("bad topology magic")
    (version,) = struct.unpack_from("<I", view, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported topology version {version}")
    (direction,) = struct.unpack_from("<B", view, 8)
    node_count, edge_count = struct.unpack_from("<QQ", view, 9)
    pos = 25
    need = (node_count + 1) * 8
    if len(view) < pos + need:
        raise FormatError("topology data truncated in offsets")
    offsets = struct.unpack_from(f"<{node_count + 1}Q", view, pos)
    pos += need
    if offsets[-1] != edge_count:
        raise FormatError("offset table disagrees with edge count")
    need = edge_count * 8
    if len(view) < pos + need:
        raise FormatError("topology data truncated in targets")
    flat = struct.unpack_from(f"<{edge_count}Q", view, pos) if edge_count else ()
    pos += need
    graph = AdjacencyGraph(direction)
    for i in range(node_count):
        graph.targets.append(list(flat[offsets[i] : offsets[i + 1]]))
    graph.edge_count = edge_count
    edge_locations = {}
    entry = struct.Struct("<QQIQ")
    remaining = len(view) - pos
    if remaining % entry.size != 0:
        raise FormatError("topology data truncated in edge entries")
    for _ in range(remaining // entry.size):
        src, dst, oid, tid = entry.unpack_from(view, pos)
        pos += entry.size
        edge_locations[(src, dst)] = (oid, tid)
    return graph, edge_locations


class Mappers:
    """The record<->topology bridge; kept bijective over live vertices."""

    def __init__(self):
        self.nid_by_key = {}  # (oid, vid) -> nid
        self.vertex_by_nid = {}  # nid -> (oid, tid)
        self.edge_by_pair = {}  # (nid_s, nid_t) -> (oid, tid)


class GraphStore:
    """One graph's topology, mappers, and staged mutation protocol.

    `collections` maps oid -> Collection for the vertex tables and the
    edge table. Endpoint-table usage is tracked per (source oid, target
    oid) pair so the planner can prove when a far-end label test cannot
    fail.
    """

    def __init__(self, graphdef, catalog, collections):
        self.graphdef = graphdef
        self.catalog = catalog
        self.collections = collections
        self.forward = AdjacencyGraph(FORWARD)
        self.reverse = AdjacencyGraph(REVERSE)
        self.mappers = Mappers()
        self.next_nid = 0
        self.endpoint_pairs = {}  # (soid, toid) -> live edge count
        self.version = 0

    # -- loading --------------------------------------------------------

    def build_from_records(self):
        """Rebuild topology and mappers by scanning the record store."""
        for oid in self.graphdef.vertex_oids:
            coll = self.collections[oid]
            for record in coll.iter_live():
                self._register_vertex(oid, record)
        edge_coll = self.collections[self.graphdef.edge_oid]
        for record in edge_coll.iter_live():
            self._register_edge(record, check_duplicate=True)

    def _register_vertex(self, oid, record):
        key = (oid, record.values[0])
        if key in self.mappers.nid_by_key:
            raise SchemaError(f"duplicate vertex key {key} in graph {self.graphdef.name}")
        nid = self.next_nid
        self.next_nid += 1
        self.forward.ensure_node(nid)
        self.reverse.ensure_node(nid)
        self.mappers.nid_by_key[key] = nid
        self.mappers.vertex_by_nid[nid] = (oid, record.tid)
        return nid

    def _register_edge(self, record, check_duplicate):
        soid, svid, toid, tvid = record.values[:4]
        src = self.mappers.nid_by_key.get((soid, svid))
        dst = self.mappers.nid_by_key.get((toid, tvid))
        if src is None or dst is None:
            raise NotFoundError(
                f"edge endpoints ({soid},{svid})->({toid},{tvid}) not in graph {self.graphdef.name}"
            )
        pair = (src, dst)
        if check_duplicate and pair in self.mappers.edge_by_pair:
            raise SchemaError(f"duplicate edge pair {pair} in graph {self.graphdef.name}")
        self.forward.add_edge(src, dst)
        self.reverse.add_edge(dst, src)
        self.mappers.edge_by_pair[pair] = (self.graphdef.edge_oid, record.tid)
        ep = (soid, toid)
        self.endpoint_pairs[ep] = self.endpoint_pairs.get(ep, 0) + 1
        return pair

    def _unregister_edge_pair(self, pair):
        src, dst = pair
        oid, tid = self.mappers.edge_by_pair.pop(pair)
        self.forward.remove_edge(src, dst)
        self.reverse.remove_edge(dst, src)
        edge_coll = self.collections[self.graphdef.edge_oid]
        record = edge_coll.rows[tid]
        ep = (record.values[0], record.values[2])
        self.endpoint_pairs[ep] -= 1
        if self.endpoint_pairs[ep] == 0:
            del self.endpoint_pairs[ep]
        return oid, tid

    # -- mapper lookups ---------------------------------------------------

    def nid_of(self, key):
        nid = self.mappers.nid_by_key.get(tuple(key))
        if nid is None:
            raise NotFoundError(f"no vertex with key {key} in graph {self.graphdef.name}")
        return nid

    def vertex_of(self, nid):
        loc = self.mappers.vertex_by_nid.get(nid)
        if loc is None:
            raise NotFoundError(f"no vertex with nid {nid} in graph {self.graphdef.name}")
        return loc

    def edge_of(self, src, dst):
        loc = self.mappers.edge_by_pair.get((src, dst))
        if loc is None:
            raise NotFoundError(f"no edge ({src},{dst}) in graph {self.graphdef.name}")
        return loc

    def neighbors(self, nid, direction=FORWARD):
        graph = self.forward if direction == FORWARD else self.reverse
        return graph.neighbors(nid)

    def fetch_vertex(self, nid):
        oid, tid = self.vertex_of(nid)
        return oid, self.collections[oid].fetch(tid)

    def fetch_edge(self, src, dst):
        oid, tid = self.edge_of(src, dst)
        return oid, self.collections[oid].fetch(tid)

    def source_oids(self):
        return {s for (s, _) in self.endpoint_pairs}

    def target_oids(self):
        return {t for (_, t) in self.endpoint_pairs}

    def avg_out_degree(self):
        live = len(self.mappers.vertex_by_nid)
        return self.forward.edge_count / live if live else 0.0

    # -- mutations --------------------------------------------------------

    def insert_vertices(self, oid, values_seq):
        """Insert vertex records and allocate fresh nids; adjacency untouched."""
        if oid not in self.graphdef.vertex_oids:
            raise SchemaError(f"oid {oid} is not a vertex table of {self.graphdef.name}")
        coll = self.collections[oid]
        values_seq = [tuple(v) for v in values_seq]
        seen = set()
        for values in values_seq:
            key = (oid, values[0])
            if key in self.mappers.nid_by_key or key in seen:
                raise SchemaError(f"duplicate vertex key {key}")
            seen.add(key)
        tids = coll.insert(values_seq)
        self.register_vertices(oid, tids)
        return tids

    def register_vertices(self, oid, tids):
        """Allocate fresh nids for records already in the record store."""
        coll = self.collections[oid]
        for tid in tids:
            self._register_vertex(oid, coll.rows[tid])
        self.version += 1

    def insert_edges(self, values_seq):
        """Insert edge records and extend both adjacency directions."""
        values_seq = [tuple(v) for v in values_seq]
        seen = set()
        for values in values_seq:
            soid, svid, toid, tvid = values[:4]
            src = self.mappers.nid_by_key.get((soid, svid))
            dst = self.mappers.nid_by_key.get((toid, tvid))
            if src is None or dst is None:
                raise NotFoundError(
                    f"edge endpoints ({soid},{svid})->({toid},{tvid}) not in graph"
                )
            pair = (src, dst)
            if pair in self.mappers.edge_by_pair or pair in seen:
                raise SchemaError(f"duplicate edge pair {pair}")
            seen.add(pair)
        coll = self.collections[self.graphdef.edge_oid]
        tids = coll.insert(values_seq)
        for tid in tids:
            self._register_edge(coll.rows[tid], check_duplicate=False)
        self.version += 1
        return tids

    def delete_edge(self, key):
        """key = (soid, svid, toid, tvid); topology first, then the record."""
        soid, svid, toid, tvid = key
        src = self.nid_of((soid, svid))
        dst = self.nid_of((toid, tvid))
        pair = (src, dst)
        if pair not in self.mappers.edge_by_pair:
            raise NotFoundError(f"no edge {key} in graph {self.graphdef.name}")
        _, tid = self._unregister_edge_pair(pair)
        self.collections[self.graphdef.edge_oid].delete(tid)
        self.version += 1

    def detach_vertex(self, key):
        """Remove a vertex from topology and mappers, cascading to incident
        edges (their records too); the vertex record itself stays."""
        key = tuple(key)
        nid = self.nid_of(key)
        incident = [(nid, t) for t in self.forward.targets[nid]]
        incident += [(s, nid) for s in self.reverse.targets[nid] if (s, nid) not in incident]
        edge_coll = self.collections[self.graphdef.edge_oid]
        for pair in incident:
            _, tid = self._unregister_edge_pair(pair)
            edge_coll.delete(tid)
        oid, tid = self.mappers.vertex_by_nid.pop(nid)
        del self.mappers.nid_by_key[key]
        # nid retired, never reused: the adjacency row stays as a hole
        self.version += 1
        return oid, tid

    def delete_vertex(self, key):
        """Cascades to all incident edges in both directions."""
        oid, tid = self.detach_vertex(key)
        self.collections[oid].delete(tid)

    # -- persistence ------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        fwd_name, rev_name = self.graphdef.topology_files()
        (directory / fwd_name).write_bytes(serialize(self.forward, self.mappers.edge_by_pair))
        (directory / rev_name).write_bytes(serialize(self.reverse))
        vmap = {
            "next_nid": self.next_nid,
            "entries": [
                [nid, oid, tid] for nid, (oid, tid) in sorted(self.mappers.vertex_by_nid.items())
            ],
        }
        (directory / f"{self.graphdef.name}.vmap").write_text(
            json.dumps(vmap), encoding="utf-8"
        )

    def load(self, directory):
        """Load topology files; rebuild from records if they are stale
        (a crash before save leaves the record logs ahead of the files)."""
        directory = Path(directory)
        fwd_name, rev_name = self.graphdef.topology_files()
        fwd_path, rev_path = directory / fwd_name, directory / rev_name
        vmap_path = directory / f"{self.graphdef.name}.vmap"
        if not (fwd_path.exists() and rev_path.exists() and vmap_path.exists()):
            self.build_from_records()
            return
        try:
            self._load_files(fwd_path, rev_path, vmap_path)
        except FormatError:
            self._reset()
            self.build_from_records()

    def _reset(self):
        self.forward = AdjacencyGraph(FORWARD)
        self.reverse = AdjacencyGraph(REVERSE)
        self.mappers = Mappers()
        self.next_nid = 0
        self.endpoint_pairs = {}

    def _load_files(self, fwd_path, rev_path, vmap_path):
        self.forward, edge_locations = deserialize(fwd_path.read_bytes())
        self.reverse, _ = deserialize(rev_path.read_bytes())
        vmap = json.loads(vmap_path.read_text(encoding="utf-8"))
        self.next_nid = vmap["next_nid"]
        self.mappers = Mappers()
        for nid, oid, tid in vmap["entries"]:
            record = self.collections[oid].rows.get(tid)
            if record is None:
                raise FormatError(f"vertex map of {self.graphdef.name} points at dead tid {tid}")
            self.mappers.vertex_by_nid[nid] = (oid, tid)
            self.mappers.nid_by_key[(oid, record.values[0])] = nid
        live_vertices = sum(
            self.collections[oid].live_count() for oid in self.graphdef.vertex_oids
        )
        if len(self.mappers.vertex_by_nid) != live_vertices:
            raise FormatError(f"vertex map of {self.graphdef.name} is stale")
        self.mappers.edge_by_pair = dict(edge_locations)
        edge_coll = self.collections[self.graphdef.edge_oid]
        if len(edge_locations) != edge_coll.live_count():
            raise FormatError(f"edge map of {self.graphdef.name} is stale")
        self.endpoint_pairs = {}
        for (_, tid) in edge_locations.values():
            record = edge_coll.rows.get(tid)
            if record is None:
                raise FormatError(f"edge map of {self.graphdef.name} points at dead tid {tid}")
            ep = (record.values[0], record.values[2])
            self.endpoint_pairs[ep] = self.endpoint_pairs.get(ep, 0) + 1

    # -- consistency --------------------------------------------------------

    def audit(self):
        """The four dual-store consistency clauses; returns a report dict."""
        failures = []
        for key, nid in self.mappers.nid_by_key.items():
            loc = self.mappers.vertex_by_nid.get(nid)
            if loc is None:
                failures.append(f"nid {nid} of key {key} missing from vertex map")
                continue
            oid, tid = loc
            coll = self.collections.get(oid)
            record = coll.rows.get(tid) if coll else None
            if record is None:
                failures.append(f"vertex map for nid {nid} points at dead record {tid}")
            elif get_vertex_key(record, coll.schema) != key:
                failures.append(f"vertex map round trip broke for key {key}")
        forward_pairs = set()
        for src, dst in self.forward.pairs():
            forward_pairs.add((src, dst))
        reverse_pairs = {(s, d) for (d, s) in self.reverse.pairs()}
        if forward_pairs != reverse_pairs:
            failures.append("forward and reverse adjacency disagree")
        if set(self.mappers.edge_by_pair) != forward_pairs:
            failures.append("edge map domain differs from the forward pair set")
        if not (
            len(self.mappers.edge_by_pair)
            == self.forward.edge_count
            == self.reverse.edge_count
            == len(forward_pairs)
        ):
            failures.append("edge counts disagree across the dual store")
        return {
            "graph": self.graphdef.name,
            "consistent": not failures,
            "vertices": len(self.mappers.vertex_by_nid),
            "edges": self.forward.edge_count,
            "failures": failures,
        }


class GraphCache:
    """Loads each graph's store once and patches it in place on mutation."""

    def __init__(self, catalog, collections, directory=None):
        self.catalog = catalog
        self.collections = collections
        self.directory = directory
        self._stores = {}

    def get(self, name):
        if name not in self._stores:
            graphdef = self.catalog.graph(name)
            store = GraphStore(graphdef, self.catalog, self.collections)
            if self.directory is not None:
                store.load(self.directory)
            else:
                store.build_from_records()
            self._stores[name] = store
        return self._stores[name]

    def loaded(self):
        return dict(self._stores)

    def save_all(self):
        if self.directory is None:
            return
        for store in self._stores.values():
            store.save(self.directory)
