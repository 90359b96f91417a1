"""Front end for the query language.

    SELECT <items> FROM <sources> [MATCH <chain pattern>] [WHERE <bool expr>]
    ANALYZE <MULTIPLY|SIMILARITY|REGRESSION> USING (<query>) [AND (<query>)]
            [WITH (key=value, ...)]

Pattern atoms are `(var:Label)` vertices joined by `-[var:Label]->` or
`<-[var:Label]-` edges; labels may contain spaces. Document paths use
`ref->>'key'` (or a non-negative integer index). Joins are written as
WHERE equalities. Errors carry line/column positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import QuerySyntaxError
from .predicates import And, ColumnRef, Comparison, Literal, Not, Or, format_expr

KEYWORDS = {
    "SELECT", "FROM", "MATCH", "WHERE", "AND", "OR", "NOT", "AS",
    "TRUE", "FALSE", "NULL", "ANALYZE", "USING", "WITH",
}

_SYMBOLS = [
    "->>", "]->", "<-[", "-[", "]-", "<>", "!=", "<=", ">=",
    "(", ")", ",", ".", "*", "=", "<", ">", ":", ";",
]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'number' | 'string' | 'symbol' | 'keyword' | 'eof'
    text: str
    value: object
    line: int
    col: int


def tokenize(text):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in "'\"":
            quote = ch
            j = i + 1
            out = []
            while j < n:
                if text[j] == quote:
                    if quote == "'" and j + 1 < n and text[j + 1] == "'":
                        out.append("'")
                        j += 2
                        continue
                    break
                out.append(text[j])
                j += 1
            else:
                raise QuerySyntaxError("unterminated string literal", (line, col))
            tokens.append(Token("string", text[i : j + 1], "".join(out), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit() or (
            ch == "-" and i + 1 < n and text[i + 1].isdigit()
        ):
            j = i + 1
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    # a trailing dot belongs to a qualified name, not the number
                    if j + 1 >= n or not text[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            raw = text[i:j]
            value = float(raw) if "." in raw else int(raw)
            tokens.append(Token("number", raw, value, line, col))
            col += j - i
            i = j
            continue
        matched = None
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                matched = sym
                break
        if matched:
            tokens.append(Token("symbol", matched, matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token("keyword", upper, upper, line, col))
            else:
                tokens.append(Token("ident", word, word, line, col))
            col += j - i
            i = j
            continue
        raise QuerySyntaxError(f"unexpected character {ch!r}", (line, col))
    tokens.append(Token("eof", "", None, line, col))
    return tokens


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class SelectItem:
    expr: object
    alias: str | None = None

    def output_name(self):
        return self.alias if self.alias else format_expr(self.expr)


@dataclass(frozen=True)
class SourceRef:
    name: str
    alias: str


@dataclass(frozen=True)
class VertexAtom:
    var: str
    label: str


@dataclass(frozen=True)
class EdgeAtom:
    var: str
    label: str
    forward: bool  # True when written -[..]->, False for <-[..]-


@dataclass(frozen=True)
class MatchClause:
    atoms: tuple  # alternating VertexAtom / EdgeAtom, starting and ending on a vertex


@dataclass(frozen=True)
class SelectQuery:
    items: tuple | None  # None means SELECT *
    sources: tuple
    match: MatchClause | None
    where: object | None


@dataclass(frozen=True)
class AnalyzeStatement:
    operator: str  # MULTIPLY | SIMILARITY | REGRESSION
    queries: tuple
    params: dict = field(default_factory=dict, hash=False, compare=True)

    def __hash__(self):
        return hash((self.operator, self.queries, tuple(sorted(self.params.items()))))


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise QuerySyntaxError(message, (tok.line, tok.col))

    def accept(self, kind, text=None):
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        return None

    def expect(self, kind, text=None):
        tok = self.accept(kind, text)
        if tok is None:
            want = text or kind
            self.error(f"expected {want!r}, found {self.peek().text!r}")
        return tok

    # -- statements ---------------------------------------------------------

    def parse_statement(self):
        if self.peek().text == "ANALYZE":
            stmt = self.parse_analyze()
        else:
            stmt = self.parse_select()
        self.accept("symbol", ";")
        if self.peek().kind != "eof":
            self.error(f"trailing input {self.peek().text!r}")
        return stmt

    def parse_select(self):
        self.expect("keyword", "SELECT")
        items = self.parse_items()
        self.expect("keyword", "FROM")
        sources = self.parse_sources()
        match = None
        if self.accept("keyword", "MATCH"):
            match = self.parse_pattern()
        where = None
        if self.accept("keyword", "WHERE"):
            where = self.parse_bool_expr()
        return SelectQuery(items=items, sources=tuple(sources), match=match, where=where)

    def parse_analyze(self):
        self.expect("keyword", "ANALYZE")
        op_tok = self.expect("ident")
        operator = op_tok.text.upper()
        if operator not in ("MULTIPLY", "SIMILARITY", "REGRESSION"):
            self.error(f"unknown analysis operator {op_tok.text!r}", op_tok)
        self.expect("keyword", "USING")
        self.expect("symbol", "(")
        queries = [self.parse_select()]
        self.expect("symbol", ")")
        if self.accept("keyword", "AND"):
            self.expect("symbol", "(")
            queries.append(self.parse_select())
            self.expect("symbol", ")")
        params = {}
        if self.accept("keyword", "WITH"):
            self.expect("symbol", "(")
            while True:
                key = self.expect("ident").text
                self.expect("symbol", "=")
                tok = self.peek()
                if tok.kind in ("number", "string"):
                    params[key] = self.advance().value
                elif tok.kind == "keyword" and tok.text in ("TRUE", "FALSE"):
                    params[key] = self.advance().text == "TRUE"
                elif tok.kind == "ident":
                    params[key] = self.advance().text
                else:
                    self.error("expected a parameter value")
                if not self.accept("symbol", ","):
                    break
            self.expect("symbol", ")")
        return AnalyzeStatement(operator=operator, queries=tuple(queries), params=params)

    # -- clauses --------------------------------------------------------------

    def parse_items(self):
        if self.accept("symbol", "*"):
            return None
        items = [self.parse_item()]
        while self.accept("symbol", ","):
            items.append(self.parse_item())
        return tuple(items)

    def parse_item(self):
        expr = self.parse_scalar()
        alias = None
        if self.accept("keyword", "AS"):
            alias = self.expect("ident").text
        return SelectItem(expr=expr, alias=alias)

    def parse_sources(self):
        sources = [self.parse_source()]
        while self.accept("symbol", ","):
            sources.append(self.parse_source())
        return sources

    def parse_source(self):
        name = self.expect("ident").text
        alias = name
        if self.accept("keyword", "AS"):
            alias = self.expect("ident").text
        elif self.peek().kind == "ident":
            alias = self.advance().text
        return SourceRef(name=name, alias=alias)

    def parse_pattern(self):
        atoms = [self.parse_vertex_atom()]
        while True:
            tok = self.peek()
            if tok.text == "-[":
                self.advance()
                var, label = self.parse_var_label("]")
                self.expect("symbol", "]->")
                atoms.append(EdgeAtom(var=var, label=label, forward=True))
                atoms.append(self.parse_vertex_atom())
            elif tok.text == "<-[":
                self.advance()
                var, label = self.parse_var_label("]")
                self.expect("symbol", "]-")
                atoms.append(EdgeAtom(var=var, label=label, forward=False))
                atoms.append(self.parse_vertex_atom())
            else:
                break
        return MatchClause(atoms=tuple(atoms))

    def parse_vertex_atom(self):
        self.expect("symbol", "(")
        var, label = self.parse_var_label(")")
        self.expect("symbol", ")")
        return VertexAtom(var=var, label=label)

    def parse_var_label(self, closer):
        var = self.expect("ident").text
        self.expect("symbol", ":")
        words = [self.expect("ident").text]
        while self.peek().kind == "ident":
            words.append(self.advance().text)
        return var, " ".join(words)

    # -- expressions ------------------------------------------------------------

    def parse_bool_expr(self):
        left = self.parse_bool_term()
        parts = [left]
        while self.accept("keyword", "OR"):
            parts.append(self.parse_bool_term())
        if len(parts) > 1:
            return Or(tuple(parts))
        return left

    def parse_bool_term(self):
        parts = [self.parse_bool_factor()]
        while self.accept("keyword", "AND"):
            parts.append(self.parse_bool_factor())
        if len(parts) > 1:
            return And(tuple(parts))
        return parts[0]

    def parse_bool_factor(self):
        if self.accept("keyword", "NOT"):
            return Not(self.parse_bool_factor())
        if self.peek().text == "(":
            # could be a parenthesized boolean or the left side of a comparison
            saved = self.pos
            self.advance()
            try:
                inner = self.parse_bool_expr()
                self.expect("symbol", ")")
                return inner
            except QuerySyntaxError:
                self.pos = saved
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.parse_scalar()
        tok = self.peek()
        op = None
        if tok.text in ("=", "!=", "<>", "<", "<=", ">", ">="):
            op = "!=" if tok.text == "<>" else tok.text
            self.advance()
        else:
            self.error(f"expected a comparison operator, found {tok.text!r}")
        right = self.parse_scalar()
        return Comparison(op, left, right)

    def parse_scalar(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return self.maybe_path(Literal(tok.value))
        if tok.kind == "string":
            self.advance()
            return self.maybe_path(Literal(tok.value))
        if tok.kind == "keyword" and tok.text in ("TRUE", "FALSE", "NULL"):
            self.advance()
            value = None if tok.text == "NULL" else tok.text == "TRUE"
            return Literal(value)
        if tok.kind == "ident":
            first = self.advance().text
            if self.accept("symbol", "."):
                second = self.expect("ident").text
                return self.maybe_path(ColumnRef(qualifier=first, name=second))
            return self.maybe_path(ColumnRef(qualifier=None, name=first))
        self.error(f"expected a value or column reference, found {tok.text!r}")

    def maybe_path(self, expr):
        steps = []
        while self.accept("symbol", "->>"):
            tok = self.peek()
            if tok.kind == "string":
                steps.append(self.advance().value)
            elif tok.kind == "number" and isinstance(tok.value, int) and tok.value >= 0:
                steps.append(self.advance().value)
            else:
                self.error("path steps are quoted keys or non-negative indexes")
        if not steps:
            return expr
        if not isinstance(expr, ColumnRef):
            self.error("a path must start from a column or collection reference")
        return ColumnRef(
            qualifier=expr.qualifier, name=expr.name, path=expr.path + tuple(steps)
        )


def parse(text):
    """Parse one statement (query or ANALYZE); raises QuerySyntaxError."""
    return _Parser(tokenize(text)).parse_statement()


def parse_query(text):
    stmt = parse(text)
    if not isinstance(stmt, SelectQuery):
        raise QuerySyntaxError("expected a SELECT query")
    return stmt


# -- printer -------------------------------------------------------------------


def format_query(stmt):
    """Canonical text form; parsing it back yields an equal AST."""
    if isinstance(stmt, AnalyzeStatement):
        parts = [f"ANALYZE {stmt.operator} USING ({format_query(stmt.queries[0])})"]
        if len(stmt.queries) > 1:
            parts.append(f"AND ({format_query(stmt.queries[1])})")
        if stmt.params:
            kv = ", ".join(f"{k} = {_format_param(v)}" for k, v in stmt.params.items())
            parts.append(f"WITH ({kv})")
        return " ".join(parts)
    if stmt.items is None:
        items = "*"
    else:
        items = ", ".join(
            format_expr(i.expr) + (f" AS {i.alias}" if i.alias else "") for i in stmt.items
        )
    sources = ", ".join(
        s.name if s.alias == s.name else f"{s.name} AS {s.alias}" for s in stmt.sources
    )
    text = f"SELECT {items} FROM {sources}"
    if stmt.match is not None:
        text += " MATCH " + format_pattern(stmt.match)
    if stmt.where is not None:
        text += " WHERE " + format_expr(stmt.where)
    return text


def format_pattern(match):
    out = []
    atoms = list(match.atoms)
    i = 0
    while i < len(atoms):
        atom = atoms[i]
        if isinstance(atom, VertexAtom):
            out.append(f"({atom.var}:{atom.label})")
        else:
            body = f"[{atom.var}:{atom.label}]"
            out.append(f"-{body}->" if atom.forward else f"<-{body}-")
        i += 1
    return "".join(out)


def _format_param(v):
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return f"'{v}'"
    return str(v)
