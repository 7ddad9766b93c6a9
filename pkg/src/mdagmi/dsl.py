"""The ``.mdag`` text format.

Example::

    dag "fig3b" {
      node X { status: incomplete }
      node Y { status: incomplete }
      X -> Y;
      Y -> R[X];
      target: Y ~ X
    }

``M[V]`` is accepted wherever ``R[V]`` is; both name the response
indicator of ``V``.  Variables must be declared before they are used.
Comments run from ``#`` to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .graph import AnalysisSpec, CycleError, GraphError, MDag, Node, Role, Status, build

STATUSES = tuple(s.value for s in Status)
ROLES = tuple(r.value for r in Role)


class ParseError(ValueError):
    """Syntax or validation error with a 1-based source position."""

    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.token = token
        where = f"line {line}, column {column}"
        near = f" near {token!r}" if token else ""
        super().__init__(f"{where}: {message}{near}")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, STRING, SYM, EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>->|[{}\[\]:;,~+])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise ParseError("unterminated string", line, col, ch)
            raise ParseError("unexpected character", line, col, ch)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "string":
            tokens.append(Token("STRING", chunk, line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", chunk, line, col))
        elif kind == "sym":
            tokens.append(Token("SYM", chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


def _unquote(tok: Token) -> str:
    body = tok.text[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    token: str


@dataclass(frozen=True)
class NodeDecl:
    name: str
    status: str
    role: str | None
    span: Span


@dataclass(frozen=True)
class EdgeDecl:
    src: Node
    dst: Node
    span: Span


@dataclass(frozen=True)
class AnalysisDecl:
    outcome: str
    exposure: str
    covariates: tuple[str, ...]
    auxiliaries: tuple[str, ...]
    span: Span


@dataclass(frozen=True)
class DagDocument:
    name: str
    statements: tuple

    @property
    def analysis(self) -> AnalysisDecl:
        return next(s for s in self.statements if isinstance(s, AnalysisDecl))


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.declared: dict[str, NodeDecl] = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.column, tok.text)

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("SYM", "IDENT"):
            self.fail(f"expected {text!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "IDENT":
            self.fail(f"expected {what}")
        return self.advance()

    def known(self, tok: Token) -> str:
        if tok.text not in self.declared:
            self.fail("unknown variable", tok)
        return tok.text

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def document(self) -> DagDocument:
        self.expect("dag")
        if self.tok.kind != "STRING":
            self.fail("expected a quoted graph name")
        name = _unquote(self.advance())
        self.expect("{")
        statements = []
        analysis_seen = False
        while not (self.tok.kind == "SYM" and self.tok.text == "}"):
            if self.tok.kind == "EOF":
                self.fail("unexpected end of input; missing '}'")
            stmt = self.statement()
            if isinstance(stmt, AnalysisDecl):
                if analysis_seen:
                    raise ParseError("only one target declaration is allowed", stmt.span.line, stmt.span.column, stmt.span.token)
                analysis_seen = True
            statements.append(stmt)
        close = self.advance()
        if self.tok.kind != "EOF":
            self.fail("unexpected content after the closing '}'")
        if not analysis_seen:
            raise ParseError("missing target declaration", close.line, close.column, close.text)
        return DagDocument(name, tuple(statements))

    def statement(self):
        tok = self.tok
        if tok.kind == "IDENT" and tok.text == "node" and self.peek().kind == "IDENT":
            return self.node_decl()
        if tok.kind == "IDENT" and tok.text == "target" and self.peek().text == ":":
            return self.analysis_decl()
        if tok.kind == "IDENT":
            return self.edge_decl()
        self.fail("expected a node, edge or target declaration")

    def node_decl(self) -> NodeDecl:
        start = self.advance()
        name_tok = self.ident("variable name")
        if name_tok.text in self.declared:
            self.fail("duplicate variable", name_tok)
        self.expect("{")
        self.expect("status")
        self.expect(":")
        status_tok = self.ident("status")
        if status_tok.text not in STATUSES:
            self.fail(f"status must be one of {', '.join(STATUSES)}", status_tok)
        role = None
        if self.tok.text == ",":
            self.advance()
            self.expect("role")
            self.expect(":")
            role_tok = self.ident("role")
            if role_tok.text not in ROLES:
                self.fail(f"role must be one of {', '.join(ROLES)}", role_tok)
            role = role_tok.text
        self.expect("}")
        decl = NodeDecl(name_tok.text, status_tok.text, role, Span(start.line, start.column, name_tok.text))
        self.declared[decl.name] = decl
        return decl

    def endpoint(self) -> tuple[Node, Token]:
        tok = self.ident("edge endpoint")
        if tok.text in ("R", "M") and self.tok.text == "[":
            self.advance()
            owner = self.ident("variable name")
            self.known(owner)
            self.expect("]")
            return Node(owner.text, indicator=True), tok
        self.known(tok)
        return Node(tok.text), tok

    def edge_decl(self) -> EdgeDecl:
        src, first = self.endpoint()
        self.expect("->")
        dst, _ = self.endpoint()
        if self.tok.text == ";" and self.tok.kind == "SYM":
            self.advance()
        return EdgeDecl(src, dst, Span(first.line, first.column, first.text))

    def analysis_decl(self) -> AnalysisDecl:
        start = self.advance()
        self.expect(":")
        outcome = self.known(self.ident("outcome"))
        self.expect("~")
        rhs = [self.known(self.ident("exposure"))]
        while self.tok.text == "+":
            self.advance()
            rhs.append(self.known(self.ident("covariate")))
        aux: list[str] = []
        if self.tok.text == ";" and self.peek().text == "auxiliary":
            self.advance()
            self.advance()
            self.expect(":")
            aux.append(self.known(self.ident("auxiliary variable")))
            while self.tok.text == ",":
                self.advance()
                aux.append(self.known(self.ident("auxiliary variable")))
        if self.tok.text == ";" and self.tok.kind == "SYM":
            self.advance()
        return AnalysisDecl(outcome, rhs[0], tuple(rhs[1:]), tuple(aux), Span(start.line, start.column, start.text))


def parse_document(text: str) -> DagDocument:
    """Parse text into a :class:`DagDocument` without building the graph."""
    return _Parser(text).document()


def parse(text: str) -> MDag:
    """Parse an ``.mdag`` document and build the graph.

    Raises
    ------
    ParseError
        On syntax errors and on every graph validation error; the position
        points at the offending statement.
    """
    doc = parse_document(text)
    a = doc.analysis
    analysis = AnalysisSpec(a.exposure, a.outcome, a.covariates, a.auxiliaries)
    nodes = [s for s in doc.statements if isinstance(s, NodeDecl)]
    edges = [s for s in doc.statements if isinstance(s, EdgeDecl)]
    try:
        return build(
            [(n.name, n.role, n.status) for n in nodes],
            [(e.src, e.dst) for e in edges],
            analysis,
            name=doc.name,
        )
    except GraphError as exc:
        span = _span_for(exc, nodes, edges, a)
        raise ParseError(str(exc), span.line, span.column, span.token) from exc


def _span_for(exc: GraphError, nodes, edges, analysis: AnalysisDecl) -> Span:
    subject = exc.subject
    if isinstance(exc, CycleError):
        cyc = exc.cycle
        pairs = {(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))}
        hits = [e for e in edges if (e.src, e.dst) in pairs]
        return max(hits, key=lambda e: (e.span.line, e.span.column)).span
    if isinstance(subject, tuple):
        for e in edges:
            if (e.src, e.dst) == subject:
                return e.span
    if isinstance(subject, str):
        for n in nodes:
            if n.name == subject:
                return n.span
    return analysis.span


def _endpoint_text(n: Node) -> str:
    return f"R[{n.name}]" if n.indicator else n.name


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize(g: MDag) -> str:
    """Canonical document: nodes sorted by name, edges sorted by their text."""
    lines = [f"dag {_quote(g.name)} {{"]
    for v in sorted(g.variables, key=lambda v: v.name):
        role = "" if v.role is Role.OTHER else f", role: {v.role.value}"
        lines.append(f"  node {v.name} {{ status: {v.status.value}{role} }}")
    for src, dst in sorted((_endpoint_text(s), _endpoint_text(d)) for s, d in g.edges):
        lines.append(f"  {src} -> {dst};")
    a = g.analysis
    target = f"  target: {a.outcome} ~ " + " + ".join((a.exposure,) + a.covariates)
    if a.auxiliaries:
        target += "; auxiliary: " + ", ".join(a.auxiliaries)
    lines.append(target)
    lines.append("}")
    return "\n".join(lines) + "\n"


def load(path) -> MDag:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
