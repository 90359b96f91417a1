"""Interactive shell and batch front end.

    crossdb --db DIR                      # REPL
    crossdb --db DIR -e "SELECT ..."      # one command, then exit
    crossdb --db DIR -f script.txt        # commands from a file

Commands: CREATE TABLE/COLLECTION/VERTEX TABLE/EDGE TABLE/GRAPH, IMPORT,
EXPORT, SELECT, EXPLAIN, ANALYZE, .audit, .stats, .bench. Exit codes:
0 ok, 1 command error, 2 audit failure.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import io
import json
import sys
from dataclasses import dataclass, field

from .bench import run_bench
from .cost import CostConstants
from .database import Database
from .errors import EngineError, QuerySyntaxError, SchemaError
from .model import T_ARRAY, T_BOOL, T_DOCUMENT, T_FLOAT, T_INT, T_TEXT
from .optimizer import ALL_RULES, OptimizerOptions
from .parser import tokenize

TYPE_WORDS = {
    "INT": T_INT,
    "INTEGER": T_INT,
    "FLOAT": T_FLOAT,
    "DOUBLE": T_FLOAT,
    "TEXT": T_TEXT,
    "STRING": T_TEXT,
    "BOOL": T_BOOL,
    "BOOLEAN": T_BOOL,
    "DOCUMENT": T_DOCUMENT,
    "JSON": T_DOCUMENT,
    "ARRAY": T_ARRAY,
}


@dataclass
class SessionConfig:
    directory: str | None = None
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    consts: CostConstants = field(default_factory=CostConstants)
    workers: int = 1
    buffer_budget: int = 64 * 1024 * 1024
    output_format: str = "table"
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if self.output_format not in ("table", "csv", "json"):
            raise ValueError(f"unknown output format {self.output_format!r}")


class Session:
    def __init__(self, config):
        self.config = config
        self.db = Database(
            directory=config.directory,
            consts=config.consts,
            workers=config.workers,
            buffer_budget=config.buffer_budget,
            optimizer=config.optimizer,
        )

    def close(self):
        self.db.close()


def _format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    return str(v)


def format_result(result, fmt):
    if fmt == "json":
        return json.dumps({"columns": result.columns, "rows": result.rows}, default=str)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv_mod.writer(buf)
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_format_value(v) for v in row])
        return buf.getvalue().rstrip("\n")
    cells = [[_format_value(v) for v in row] for row in result.rows]
    widths = [len(c) for c in result.columns]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(result.columns))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)))
    lines.append(f"({result.row_count} rows)")
    return "\n".join(lines)


# -- DDL parsing ----------------------------------------------------------------


class _DdlParser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message):
        tok = self.peek()
        raise QuerySyntaxError(message, (tok.line, tok.col))

    def expect_word(self, *words):
        tok = self.next()
        if tok.text.upper() not in words:
            raise QuerySyntaxError(
                f"expected {' / '.join(words)}, found {tok.text!r}", (tok.line, tok.col)
            )
        return tok.text.upper()

    def expect_name(self):
        tok = self.next()
        if tok.kind not in ("ident", "keyword"):
            raise QuerySyntaxError(f"expected a name, found {tok.text!r}", (tok.line, tok.col))
        return tok.text

    def expect_symbol(self, sym):
        tok = self.next()
        if tok.text != sym:
            raise QuerySyntaxError(f"expected {sym!r}, found {tok.text!r}", (tok.line, tok.col))

    def at_symbol(self, sym):
        if self.peek().text == sym:
            self.next()
            return True
        return False

    def column_list(self):
        self.expect_symbol("(")
        columns = []
        while True:
            name = self.expect_name()
            type_tok = self.next()
            ctype = TYPE_WORDS.get(type_tok.text.upper())
            if ctype is None:
                raise QuerySyntaxError(
                    f"unknown column type {type_tok.text!r}", (type_tok.line, type_tok.col)
                )
            columns.append((name, ctype))
            if not self.at_symbol(","):
                break
        self.expect_symbol(")")
        return columns

    def name_list(self):
        self.expect_symbol("(")
        names = [self.expect_name()]
        while self.at_symbol(","):
            names.append(self.expect_name())
        self.expect_symbol(")")
        return names

    def label(self):
        self.expect_word("LABEL")
        tok = self.next()
        if tok.kind == "string":
            return tok.value
        if tok.kind in ("ident", "keyword"):
            words = [tok.text]
            while self.peek().kind in ("ident", "keyword"):
                words.append(self.next().text)
            return " ".join(words)
        raise QuerySyntaxError("expected a label", (tok.line, tok.col))

    def path(self):
        tok = self.next()
        if tok.kind in ("string", "ident"):
            return tok.value if tok.kind == "string" else tok.text
        raise QuerySyntaxError("expected a file path", (tok.line, tok.col))


def run_create(session, text):
    p = _DdlParser(text)
    p.expect_word("CREATE")
    what = p.expect_word("TABLE", "COLLECTION", "VERTEX", "EDGE", "GRAPH")
    db = session.db
    if what == "TABLE":
        name = p.expect_name()
        columns = p.column_list()
        db.create_table(name, columns)
        return f"created table {name}"
    if what == "COLLECTION":
        name = p.expect_name()
        db.create_document_collection(name)
        return f"created document collection {name}"
    if what == "VERTEX":
        p.expect_word("TABLE")
        name = p.expect_name()
        columns = p.column_list() if p.peek().text == "(" else []
        label = p.label()
        db.create_vertex_table(name, columns, label)
        return f"created vertex table {name} (label {label!r})"
    if what == "EDGE":
        p.expect_word("TABLE")
        name = p.expect_name()
        columns = p.column_list() if p.peek().text == "(" else []
        label = p.label()
        db.create_edge_table(name, columns, label)
        return f"created edge table {name} (label {label!r})"
    name = p.expect_name()
    p.expect_word("VERTICES")
    vertex_tables = p.name_list()
    p.expect_word("EDGES")
    edge_tables = p.name_list()
    if len(edge_tables) != 1:
        raise SchemaError("a graph has exactly one edge table")
    db.create_graph(name, vertex_tables, edge_tables[0])
    return f"created graph {name}"


def run_audit(session):
    reports = session.db.audit()
    lines = []
    ok = True
    for r in reports:
        status = "consistent" if r["consistent"] else "INCONSISTENT"
        lines.append(f"{r['graph']}: {status} ({r['vertices']} vertices, {r['edges']} edges)")
        for f in r["failures"]:
            ok = False
            lines.append(f"  {f}")
        ok = ok and r["consistent"]
    if not reports:
        lines.append("no graphs in the catalog")
    return "\n".join(lines), ok


def run_stats(session):
    db = session.db
    lines = []
    for name in sorted(db.catalog.schemas):
        coll = db.collection(name)
        lines.append(f"{name}: kind={coll.schema.kind} rows={coll.live_count()} version={coll.version}")
    for gname in sorted(db.catalog.graphs):
        store = db.graph_store(gname)
        lines.append(
            f"{gname}: graph vertices={len(store.mappers.vertex_by_nid)} edges={store.forward.edge_count}"
        )
    c = db.counters
    lines.append(
        f"access: scans={c.scan_calls} scanned={c.scan_records} tid_fetches={c.tid_fetches}"
    )
    return "\n".join(lines)


def run_command(session, text):
    """Dispatch one command; returns (output text, exit code)."""
    text = text.strip()
    if not text:
        return "", 0
    db = session.db
    lowered = text.lower()
    if lowered == ".audit":
        out, ok = run_audit(session)
        return out, 0 if ok else 2
    if lowered == ".stats":
        return run_stats(session), 0
    if lowered.startswith(".bench"):
        parts = text.split()[1:]
        suite, scale = "default", 1
        for part in parts:
            if part.lstrip("-").isdigit():
                scale = int(part)
            else:
                suite = part
        try:
            report = run_bench(
                suite=suite, scale=scale, seed=session.config.seed,
                workers=session.config.workers,
            )
        except ValueError as exc:
            raise QuerySyntaxError(str(exc), (1, 1)) from exc
        return report.format_text(), 0
    head = lowered.split(None, 1)[0]
    if head == "create":
        return run_create(session, text), 0
    if head == "import":
        p = _DdlParser(text)
        p.expect_word("IMPORT")
        name = p.expect_name()
        p.expect_word("FROM")
        path = p.path()
        tids = db.import_path(name, path)
        return f"imported {len(tids)} records into {name}", 0
    if head == "export":
        p = _DdlParser(text)
        p.expect_word("EXPORT")
        name = p.expect_name()
        p.expect_word("TO")
        path = p.path()
        db.export_path(name, path)
        return f"exported {name} to {path}", 0
    if head == "explain":
        rest = text[len("explain"):].strip()
        return db.explain(rest, options=session.config.optimizer), 0
    if head == "analyze":
        result = db.analyze(text, options=session.config.optimizer)
        return format_analysis(result, session.config.output_format), 0
    if head == "select":
        result = db.query(text, options=session.config.optimizer)
        return format_result(result, session.config.output_format), 0
    raise QuerySyntaxError(f"unknown command {text.split(None, 1)[0]!r}", (1, 1))


def format_analysis(result, fmt):
    if result.regression is not None:
        reg = result.regression
        payload = {
            "operator": result.operator,
            "weights": [float(w) for w in reg.weights],
            "loss": reg.loss,
            "baseline_loss": result.baseline_loss,
            "iterations": reg.iterations,
            "converged": reg.converged,
            "reused_inputs": result.reused,
        }
        if fmt == "json":
            return json.dumps(payload)
        lines = [f"{result.operator}: loss={reg.loss:.6g} (baseline {result.baseline_loss:.6g})"]
        lines.append(f"iterations={reg.iterations} converged={reg.converged}")
        lines.append("weights: " + ", ".join(f"{w:.6g}" for w in reg.weights))
        if any(result.reused):
            lines.append("inputs served from the matrix buffer")
        return "\n".join(lines)
    m = result.matrix
    if fmt == "json":
        return json.dumps(
            {
                "operator": result.operator,
                "rows": m.rows,
                "cols": m.cols,
                "data": m.data.tolist(),
                "reused_inputs": result.reused,
            }
        )
    lines = [f"{result.operator}: {m.rows}x{m.cols} matrix"]
    preview = min(m.rows, 8)
    for i in range(preview):
        lines.append("  " + ", ".join(f"{v:.6g}" for v in m.data[i]))
    if preview < m.rows:
        lines.append(f"  ... {m.rows - preview} more rows")
    if any(result.reused):
        lines.append("inputs served from the matrix buffer")
    return "\n".join(lines)


def repl(session):
    print("crossdb shell; end commands with ';' on their own line, Ctrl-D to exit")
    buffer = []
    while True:
        try:
            prompt = "crossdb> " if not buffer else "    ...> "
            line = input(prompt)
        except EOFError:
            print()
            break
        stripped = line.strip()
        if not buffer and (
            stripped in (".audit", ".stats") or stripped.startswith(".bench")
        ):
            _run_and_print(session, stripped)
            continue
        buffer.append(line)
        if stripped.endswith(";"):
            command = "\n".join(buffer).strip().rstrip(";")
            buffer = []
            _run_and_print(session, command)
    return 0


def _run_and_print(session, command):
    try:
        out, code = run_command(session, command)
        if out:
            print(out)
        return code
    except EngineError as exc:
        print(exc.render(), file=sys.stderr)
        return 1


def build_arg_parser():
    ap = argparse.ArgumentParser(prog="crossdb", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--db", metavar="DIR", default=None, help="database directory (default: in-memory)")
    ap.add_argument("--opt", choices=["on", "off"], default="on", help="optimizer master switch")
    ap.add_argument("--rule", nargs=2, action="append", metavar=("NAME", "ON|OFF"),
                    default=[], help=f"toggle one rule: {', '.join(ALL_RULES)}")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--cost-io", type=float, default=100.0)
    ap.add_argument("--cost-cpu", type=float, default=1.0)
    ap.add_argument("--format", choices=["table", "csv", "json"], default="table")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-e", "--execute", action="append", default=[], metavar="CMD",
                    help="run a command and exit (repeatable)")
    ap.add_argument("-f", "--file", default=None, help="run ';'-separated commands from a file")
    return ap


def main(argv=None):
    args = build_arg_parser().parse_args(argv)
    optimizer = OptimizerOptions(enabled=(args.opt == "on"))
    for name, value in args.rule:
        if value.lower() not in ("on", "off"):
            print(f"syntax error: rule value must be on or off, got {value!r}", file=sys.stderr)
            return 1
        try:
            optimizer.set_rule(name, value.lower() == "on")
        except SchemaError as exc:
            print(exc.render(), file=sys.stderr)
            return 1
    try:
        config = SessionConfig(
            directory=args.db,
            optimizer=optimizer,
            consts=CostConstants(cpu=args.cost_cpu, io=args.cost_io),
            workers=args.workers,
            output_format=args.format,
            seed=args.seed,
        )
    except ValueError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return 1
    session = Session(config)
    try:
        commands = list(args.execute)
        if args.file:
            body = open(args.file, encoding="utf-8").read()
            commands.extend(c.strip() for c in body.split(";") if c.strip())
        if commands:
            worst = 0
            for command in commands:
                code = _run_and_print(session, command)
                worst = max(worst, code)
            return worst
        return repl(session)
    finally:
        session.close()


if __name__ == "__main__":
    sys.exit(main())
