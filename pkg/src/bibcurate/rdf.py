"""Minimal RDF term model with canonical N-Quads, SPARQL-Update deltas and JSON-LD."""

from __future__ import annotations

import json
import re
from importlib import resources
from typing import Iterable, NamedTuple, Optional, Union


class IRI(str):
    __slots__ = ()

    def __repr__(self) -> str:
        return f"IRI({str.__repr__(self)})"


class BNode(str):
    __slots__ = ()

    def __repr__(self) -> str:
        return f"BNode({str.__repr__(self)})"


XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
RDF_LANGSTRING = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString"


class Literal(NamedTuple):
    lexical: str
    datatype: str = XSD_STRING
    lang: str = ""


Term = Union[IRI, BNode, Literal]
Quad = tuple  # (subject, predicate, object, graph-or-None)


# ---------------------------------------------------------------------------
# escaping

_ECHAR = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t",
          "\b": "\\b", "\f": "\\f"}
_NEEDS_ESCAPE = re.compile(r'[\\"\x00-\x1f\x7f]')
_IRI_ESCAPE = re.compile(r'[\x00-\x20<>"{}|^`\\]')


def _escape_char(m: re.Match) -> str:
    ch = m.group(0)
    return _ECHAR.get(ch) or f"\\u{ord(ch):04X}"


def escape_literal(text: str) -> str:
    return _NEEDS_ESCAPE.sub(_escape_char, text)


def escape_iri(text: str) -> str:
    return _IRI_ESCAPE.sub(lambda m: f"\\u{ord(m.group(0)):04X}", text)


_UNESCAPE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|[tbnrf\"'\\])")
_SIMPLE = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def unescape(text: str) -> str:
    if "\\" not in text:
        return text

    def repl(m: re.Match) -> str:
        body = m.group(1)
        if body[0] in "uU":
            return chr(int(body[1:], 16))
        return _SIMPLE[body]

    return _UNESCAPE.sub(repl, text)


def term_to_nt(term: Term) -> str:
    if isinstance(term, Literal):
        body = f'"{escape_literal(term.lexical)}"'
        if term.lang:
            return f"{body}@{term.lang}"
        if term.datatype and term.datatype != XSD_STRING:
            return f"{body}^^<{escape_iri(term.datatype)}>"
        return body
    if isinstance(term, BNode):
        return f"_:{term}"
    return f"<{escape_iri(term)}>"


def quad_to_nq(quad: Quad) -> str:
    s, p, o, g = quad
    parts = [term_to_nt(s), term_to_nt(p), term_to_nt(o)]
    if g is not None:
        parts.append(term_to_nt(g))
    return " ".join(parts) + " ."


def _sort_key(quad: Quad) -> tuple:
    s, p, o, g = quad
    return ("" if g is None else term_to_nt(g), term_to_nt(s), term_to_nt(p), term_to_nt(o))


def serialize_nquads(quads: Iterable[Quad]) -> bytes:
    """Canonical N-Quads: one quad per line, ordered by (graph, subject, predicate, object)."""
    lines = sorted((_sort_key(q), quad_to_nq(q)) for q in set(quads))
    return "".join(line + "\n" for _, line in lines).encode("utf-8")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | <(?P<iri>(?:[^>\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)>
  | _:(?P<bnode>[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)
  | "(?P<lit>(?:[^"\\]|\\.)*)"(?:\^\^<(?P<dt>[^>]*)>|@(?P<lang>[A-Za-z]+(?:-[A-Za-z0-9]+)*))?
  | (?P<punct>[{}.;])
  | (?P<word>[A-Za-z]+)
""", re.VERBOSE)


# the shape every canonical dump line has; anything else goes through _tokens
_FAST_LINE = re.compile(
    r'<([^<>"{}|^`\\\s]*)> <([^<>"{}|^`\\\s]*)> '
    r'(?:<([^<>"{}|^`\\\s]*)>|"((?:[^"\\]|\\.)*)"(?:\^\^<([^<>\\\s]*)>|@([A-Za-z]+(?:-[A-Za-z0-9]+)*))?)'
    r'(?: <([^<>"{}|^`\\\s]*)>)? \.')


class ParseError(ValueError):
    pass


def _tokens(text: str, where: str = ""):
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected input {where}at {text[pos:pos + 30]!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        if kind == "iri":
            yield "term", IRI(unescape(m.group("iri")))
        elif kind == "bnode":
            yield "term", BNode(m.group("bnode"))
        elif kind in ("lit", "dt", "lang"):
            lang = m.group("lang") or ""
            dt = unescape(m.group("dt")) if m.group("dt") else (RDF_LANGSTRING if lang else XSD_STRING)
            yield "term", Literal(unescape(m.group("lit")), dt, lang.lower())
        elif kind == "punct":
            yield "punct", m.group("punct")
        else:
            yield "word", m.group("word").upper()


def parse_nquads(data) -> list[Quad]:
    """Parse N-Quads (or N-Triples) text into a list of quads, keeping duplicates."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out = []
    iris: dict = {}

    def iri(text):
        term = iris.get(text)
        if term is None:
            term = iris[text] = IRI(text)
        return term

    # only LF/CR end a statement; splitlines() would also break on U+0085 etc.
    for number, line in enumerate(data.split("\n"), start=1):
        stripped = line.strip(" \t\r")
        if not stripped or stripped.startswith("#"):
            continue
        m = _FAST_LINE.fullmatch(stripped)
        if m:
            s_, p_, o_iri, lit, dt, lang, g_ = m.groups()
            if o_iri is not None:
                o = iri(o_iri)
            else:
                lang = (lang or "").lower()
                o = Literal(unescape(lit), dt or (RDF_LANGSTRING if lang else XSD_STRING), lang)
            out.append((iri(s_), iri(p_), o, iri(g_) if g_ is not None else None))
            continue
        toks = list(_tokens(stripped, f"on line {number} "))
        if not toks or toks[-1] != ("punct", "."):
            raise ParseError(f"line {number}: statement must end with '.'")
        terms = [value for kind, value in toks[:-1] if kind == "term"]
        if len(terms) != len(toks) - 1 or len(terms) not in (3, 4):
            raise ParseError(f"line {number}: expected 3 or 4 terms")
        s, p, o = terms[:3]
        g = terms[3] if len(terms) == 4 else None
        if isinstance(s, Literal) or not isinstance(p, IRI) or isinstance(g, Literal):
            raise ParseError(f"line {number}: literal in subject/predicate/graph position")
        out.append((s, p, o, g))
    return out


# ---------------------------------------------------------------------------
# SPARQL-Update deltas

def _data_block(keyword: str, quads: Iterable[Quad]) -> str:
    by_graph: dict = {}
    for s, p, o, g in quads:
        by_graph.setdefault(g, []).append(f"{term_to_nt(s)} {term_to_nt(p)} {term_to_nt(o)} .")
    blocks = []
    for g in sorted(by_graph, key=lambda x: "" if x is None else x):
        triples = " ".join(sorted(by_graph[g]))
        blocks.append(triples if g is None else f"GRAPH {term_to_nt(g)} {{ {triples} }}")
    return f"{keyword} DATA {{ {' '.join(blocks)} }}"


def build_update(deletions: Iterable[Quad], insertions: Iterable[Quad]) -> str:
    """SPARQL UPDATE text that removes ``deletions`` then adds ``insertions``."""
    deletions, insertions = list(deletions), list(insertions)
    parts = []
    if deletions:
        parts.append(_data_block("DELETE", deletions))
    if insertions:
        parts.append(_data_block("INSERT", insertions))
    return " ;\n".join(parts)


def parse_update(text: str) -> tuple[set, set]:
    """Inverse of :func:`build_update` for ``DELETE DATA`` / ``INSERT DATA`` requests."""
    toks = list(_tokens(text))
    deletions, insertions = set(), set()
    i = 0

    def expect(kind, value=None):
        nonlocal i
        if i >= len(toks) or toks[i][0] != kind or (value is not None and toks[i][1] != value):
            found = toks[i] if i < len(toks) else "end of input"
            raise ParseError(f"expected {value or kind}, found {found}")
        i += 1
        return toks[i - 1][1]

    def triples_until_close(graph, target):
        nonlocal i
        while toks[i] != ("punct", "}"):
            s, p, o = expect("term"), expect("term"), expect("term")
            target.add((s, p, o, graph))
            if toks[i] == ("punct", "."):
                i += 1
        i += 1

    while i < len(toks):
        op = expect("word")
        if op not in ("DELETE", "INSERT"):
            raise ParseError(f"unsupported operation {op}")
        expect("word", "DATA")
        expect("punct", "{")
        target = deletions if op == "DELETE" else insertions
        while toks[i] != ("punct", "}"):
            if toks[i] == ("word", "GRAPH"):
                i += 1
                graph = expect("term")
                expect("punct", "{")
                triples_until_close(graph, target)
            else:
                s, p, o = expect("term"), expect("term"), expect("term")
                target.add((s, p, o, None))
                if toks[i] == ("punct", "."):
                    i += 1
        i += 1
        if i < len(toks):
            expect("punct", ";")
    return deletions, insertions


def apply_update(state: set, text: Optional[str]) -> set:
    if not text:
        return set(state)
    deletions, insertions = parse_update(text)
    return (set(state) - deletions) | insertions


# ---------------------------------------------------------------------------
# JSON-LD

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


def load_context() -> dict:
    text = resources.files("bibcurate").joinpath("data/context.json").read_text(encoding="utf-8")
    return json.loads(text)


def _compact(iri: str, prefixes: list[tuple[str, str]]) -> str:
    for name, ns in prefixes:
        if iri.startswith(ns) and len(iri) > len(ns):
            return f"{name}:{iri[len(ns):]}"
    return iri


def to_jsonld(quads: Iterable[Quad], context: Optional[dict] = None) -> dict:
    """Group quads by graph and subject under a prefix-only context."""
    context = context or load_context()
    prefixes = sorted(((k, v) for k, v in context["@context"].items() if isinstance(v, str)),
                      key=lambda kv: -len(kv[1]))
    graphs: dict = {}
    for s, p, o, g in set(quads):
        node = graphs.setdefault(g, {}).setdefault(s, {"@id": str(s)})
        if p == RDF_TYPE and isinstance(o, IRI):
            node.setdefault("@type", []).append(_compact(o, prefixes))
            continue
        key = _compact(p, prefixes)
        if isinstance(o, Literal):
            value = {"@value": o.lexical}
            if o.lang:
                value["@language"] = o.lang
            elif o.datatype != XSD_STRING:
                value["@type"] = _compact(o.datatype, prefixes)
        else:
            value = {"@id": str(o)}
        node.setdefault(key, []).append(value)

    def sort_node(node):
        out = {}
        for key in sorted(node):
            value = node[key]
            out[key] = sorted(value, key=lambda v: json.dumps(v, sort_keys=True)) \
                if isinstance(value, list) else value
        return out

    body = []
    for g in sorted(graphs, key=lambda x: "" if x is None else x):
        nodes = [sort_node(graphs[g][s]) for s in sorted(graphs[g])]
        body.append({"@id": str(g), "@graph": nodes} if g is not None else {"@graph": nodes})
    return {"@context": context["@context"], "@graph": body}


def from_jsonld(document: dict) -> set:
    """Read back documents produced by :func:`to_jsonld`."""
    ctx = document.get("@context", {})

    def expand(term: str) -> str:
        prefix, sep, local = term.partition(":")
        if sep and prefix in ctx and isinstance(ctx[prefix], str) and not local.startswith("//"):
            return ctx[prefix] + local
        return term

    out = set()
    for graph_obj in document.get("@graph", []):
        g = IRI(graph_obj["@id"]) if "@id" in graph_obj else None
        for node in graph_obj["@graph"]:
            s = IRI(node["@id"])
            for cls in node.get("@type", []):
                out.add((s, IRI(RDF_TYPE), IRI(expand(cls)), g))
            for key, values in node.items():
                if key.startswith("@"):
                    continue
                p = IRI(expand(key))
                for value in values:
                    if "@id" in value:
                        o = IRI(value["@id"])
                    elif "@language" in value:
                        o = Literal(value["@value"], RDF_LANGSTRING, value["@language"])
                    else:
                        o = Literal(value["@value"], expand(value.get("@type", XSD_STRING)))
                    out.add((s, p, o, g))
    return out
