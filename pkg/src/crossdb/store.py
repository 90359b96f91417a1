"""Unified record storage for all data models.

Every collection is a tid-indexed in-memory map with an optional
append-only log on disk (one log per collection, replayed on open).
Deleted tids are tombstoned and never reused, so tid-based access stays
O(1) and the topology mappers stay valid across deletions.

Concurrency contract: many readers XOR one writer per collection. Scans
iterate over a snapshot of the live tid list and records are immutable,
so readers never observe a half-applied mutation.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NotFoundError, StorageError
from .model import (
    DOC_COLUMN,
    K_DOCUMENTS,
    T_ARRAY,
    T_BOOL,
    T_DOCUMENT,
    T_FLOAT,
    T_INT,
    Record,
)
from .predicates import bind_to_schema, eval_predicate

DEFAULT_ROW_BUFFER = 4096


@dataclass
class AccessCounters:
    """Instrumented access-path counters, shared across one database."""

    scan_calls: int = 0
    scan_records: int = 0
    tid_fetches: int = 0

    def snapshot(self):
        return (self.scan_calls, self.scan_records, self.tid_fetches)

    def record_fetches(self):
        """Total records pulled from storage by any access path."""
        return self.scan_records + self.tid_fetches

    def reset(self):
        self.scan_calls = 0
        self.scan_records = 0
        self.tid_fetches = 0


class RowBuffer:
    """Bounded staging area between storage and operators."""

    def __init__(self, capacity=DEFAULT_ROW_BUFFER):
        if capacity < 1:
            raise ValueError("row buffer capacity must be >= 1")
        self.capacity = capacity
        self._rows = []

    def push(self, record):
        self._rows.append(record)
        return len(self._rows) >= self.capacity

    def drain(self):
        rows, self._rows = self._rows, []
        return rows


class Collection:
    """One stored collection: schema, live rows, tombstones, allocator."""

    def __init__(self, schema, log_path=None, counters=None, buffer_capacity=DEFAULT_ROW_BUFFER):
        self.schema = schema
        self.rows = {}  # tid -> Record
        self.tombstones = set()
        self.next_tid = 0
        self.version = 0  # bumped on every mutation; cache invalidation key
        self.counters = counters if counters is not None else AccessCounters()
        self.buffer_capacity = buffer_capacity
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        self._log_file = None
        if self._log_path is not None:
            self._replay_log()
            self._log_file = open(self._log_path, "a", encoding="utf-8")

    # -- persistence ---------------------------------------------------

    def _replay_log(self):
        if not self._log_path.exists():
            return
        try:
            with open(self._log_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    op = entry["op"]
                    tid = entry["tid"]
                    if op == "insert":
                        self.rows[tid] = Record(tid, tuple(entry["values"]))
                        self.next_tid = max(self.next_tid, tid + 1)
                    elif op == "update":
                        self.rows[tid] = Record(tid, tuple(entry["values"]))
                    elif op == "delete":
                        self.rows.pop(tid, None)
                        self.tombstones.add(tid)
                        self.next_tid = max(self.next_tid, tid + 1)
        except (json.JSONDecodeError, KeyError) as exc:
            raise StorageError(f"corrupt log for {self.schema.name}: {exc}") from exc

    def _log(self, entry):
        if self._log_file is not None:
            self._log_file.write(json.dumps(entry) + "\n")
            self._log_file.flush()

    def close(self):
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    # -- access methods ------------------------------------------------

    def live_count(self):
        return len(self.rows)

    def iter_live(self):
        """All live records in tid order, without touching the counters."""
        for tid in sorted(self.rows):
            yield self.rows[tid]

    def scan(self, pred=None):
        """Yield live records satisfying pred, in tid order.

        The predicate is bound against the schema up front, so an
        unresolvable reference fails here rather than per row. Records
        move through a bounded row buffer to keep batches small.
        """
        bound = bind_to_schema(pred, self.schema) if pred is not None else None
        self.counters.scan_calls += 1
        with self._lock:
            tids = sorted(self.rows)
        buffer = RowBuffer(self.buffer_capacity)
        for tid in tids:
            record = self.rows.get(tid)
            if record is None:
                continue  # deleted while streaming
            self.counters.scan_records += 1
            if bound is None or eval_predicate(bound, record):
                if buffer.push(record):
                    yield from buffer.drain()
        yield from buffer.drain()

    def fetch(self, tid):
        """O(1) tid-based access; tombstoned or unknown tids are not found."""
        record = self.rows.get(tid)
        if record is None:
            raise NotFoundError(f"{self.schema.name}: no live record with tid {tid}")
        self.counters.tid_fetches += 1
        return record

    def has_tid(self, tid):
        return tid in self.rows

    # -- mutations -----------------------------------------------------

    def insert(self, values_seq):
        """Insert a batch; returns the monotonically assigned tids."""
        tids = []
        with self._lock:
            for values in values_seq:
                values = tuple(values)
                self.schema.check_values(values)
                tid = self.next_tid
                self.next_tid += 1
                self.rows[tid] = Record(tid, values)
                self._log({"op": "insert", "tid": tid, "values": list(values)})
                tids.append(tid)
            if tids:
                self.version += 1
        return tids

    def update(self, tid, new_values):
        new_values = tuple(new_values)
        self.schema.check_values(new_values)
        with self._lock:
            if tid not in self.rows:
                raise NotFoundError(f"{self.schema.name}: no live record with tid {tid}")
            self.rows[tid] = Record(tid, new_values)
            self._log({"op": "update", "tid": tid, "values": list(new_values)})
            self.version += 1

    def delete(self, tid):
        with self._lock:
            if tid not in self.rows:
                raise NotFoundError(f"{self.schema.name}: no live record with tid {tid}")
            del self.rows[tid]
            self.tombstones.add(tid)
            self._log({"op": "delete", "tid": tid})
            self.version += 1


# -- import / export ----------------------------------------------------


def _parse_csv_cell(text, declared, line_no, column):
    if text == "":
        return None
    try:
        if declared == T_INT:
            return int(text)
        if declared == T_FLOAT:
            return float(text)
        if declared == T_BOOL:
            low = text.strip().lower()
            if low in ("true", "1", "t"):
                return True
            if low in ("false", "0", "f"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if declared in (T_DOCUMENT, T_ARRAY):
            return json.loads(text)
        return text
    except (ValueError, json.JSONDecodeError) as exc:
        raise StorageError(f"line {line_no}: bad {column} value {text!r}: {exc}") from exc


def read_csv_rows(schema, path):
    """Parse a header-row CSV into typed value rows for `schema`."""
    if schema.kind == K_DOCUMENTS:
        raise StorageError("document collections import from JSON Lines, not CSV")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StorageError("line 1: empty CSV file") from None
        expected = schema.column_names()
        if header != expected:
            raise StorageError(f"line 1: header {header} does not match columns {expected}")
        batch = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise StorageError(
                    f"line {line_no}: expected {len(expected)} fields, got {len(row)}"
                )
            values = [
                _parse_csv_cell(cell, ctype, line_no, cname)
                for cell, (cname, ctype) in zip(row, schema.columns)
            ]
            batch.append(values)
    return batch


def import_csv(collection, path):
    """Load a header-row CSV into a relation or vertex/edge table."""
    return collection.insert(read_csv_rows(collection.schema, path))


def export_csv(collection, path):
    schema = collection.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.column_names())
        for record in collection.iter_live():
            out = []
            for v, (_, ctype) in zip(record.values, schema.columns):
                if v is None:
                    out.append("")
                elif ctype in (T_DOCUMENT, T_ARRAY):
                    out.append(json.dumps(v))
                elif isinstance(v, bool):
                    out.append("true" if v else "false")
                else:
                    out.append(str(v))
            writer.writerow(out)


def import_jsonl(collection, path):
    """Load one JSON document per line into a document collection."""
    if collection.schema.kind != K_DOCUMENTS:
        raise StorageError(f"{collection.schema.name} is not a document collection")
    batch = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageError(f"line {line_no}: bad JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise StorageError(f"line {line_no}: top-level value must be an object")
            batch.append([doc])
    return collection.insert(batch)


def export_jsonl(collection, path):
    if collection.schema.kind != K_DOCUMENTS:
        raise StorageError(f"{collection.schema.name} is not a document collection")
    doc_idx = collection.schema.column_index(DOC_COLUMN)
    with open(path, "w", encoding="utf-8") as fh:
        for record in collection.iter_live():
            fh.write(json.dumps(record.values[doc_idx]) + "\n")
