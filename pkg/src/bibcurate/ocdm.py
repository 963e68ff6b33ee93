"""Mapping between curated entities and OCDM-shaped RDF quads.

Each OMID-bearing entity becomes one subject; its outgoing quads live in the
data graph of its entity kind (``.../br/``, ``.../ra/`` ...).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .ids import ExternalId
from .model import (AUTHOR, EDITOR, PUBLISHER, ROLE_KINDS, Agent, AgentRole, CuratedEntity,
                    Pages)
from .normalize import NormalizedDate
from .omid import BASE_IRI, OMID
from .rdf import IRI, XSD, Literal, serialize_nquads

logger = logging.getLogger(__name__)


class Namespace:
    """``FOAF.givenName`` -> IRI. Not a str subclass, so ``DCTERMS.title`` is a term."""

    def __init__(self, base: str):
        self.base = base

    def __getattr__(self, name: str) -> IRI:
        if name.startswith("__"):
            raise AttributeError(name)
        term = IRI(self.base + name)
        setattr(self, name, term)  # later lookups skip __getattr__
        return term

    def term(self, name: str) -> IRI:
        return IRI(self.base + name)

    def __str__(self) -> str:
        return self.base

    def __len__(self) -> int:
        return len(self.base)


RDF = Namespace("http://www.w3.org/1999/02/22-rdf-syntax-ns#")
FABIO = Namespace("http://purl.org/spar/fabio/")
DOCO = Namespace("http://purl.org/spar/doco/")
FR = Namespace("http://purl.org/spar/fr/")
FRBR = Namespace("http://purl.org/vocab/frbr/core#")
PRISM = Namespace("http://prismstandard.org/namespaces/basic/2.0/")
DCTERMS = Namespace("http://purl.org/dc/terms/")
DATACITE = Namespace("http://purl.org/spar/datacite/")
LITERAL = Namespace("http://www.essepuntato.it/2010/06/literalreification/")
PRO = Namespace("http://purl.org/spar/pro/")
FOAF = Namespace("http://xmlns.com/foaf/0.1/")
PROV = Namespace("http://www.w3.org/ns/prov#")
OCO = Namespace("https://w3id.org/oc/ontology/")

TYPE_CLASSES = {
    "journal article": FABIO.JournalArticle,
    "book chapter": FABIO.BookChapter,
    "proceedings article": FABIO.ProceedingsPaper,
    "journal issue": FABIO.JournalIssue,
    "book": FABIO.Book,
    "journal volume": FABIO.JournalVolume,
    "dataset": FABIO.DataFile,
    "web content": FABIO.WebContent,
    "report": FABIO.ReportDocument,
    "reference book": FABIO.ReferenceBook,
    "reference entry": FABIO.ReferenceEntry,
    "journal": FABIO.Journal,
    "proceedings": FABIO.AcademicProceedings,
    "book series": FABIO.BookSeries,
    "dissertation": FABIO.Thesis,
    "standard": FABIO.SpecificationDocument,
    "book section": FABIO.ExpressionCollection,
    "series": FABIO.Series,
    "peer review": FR.ReviewVersion,
    "book part": DOCO.Part,
    "book set": FABIO.BookSet,
}
CLASS_TYPES = {cls: tag for tag, cls in TYPE_CLASSES.items()}

ROLE_IRIS = {AUTHOR: PRO.author, EDITOR: PRO.editor, PUBLISHER: PRO.publisher}
IRI_ROLES = {iri: kind for kind, iri in ROLE_IRIS.items()}

DATE_TYPES = {"year": XSD + "gYear", "month": XSD + "gYearMonth", "day": XSD + "date"}

VOCABULARY = frozenset(
    [RDF.type, FABIO.Expression, FABIO.Manifestation, DATACITE.Identifier, PRO.RoleInTime,
     FOAF.Agent, DCTERMS.title, PRISM.publicationDate, PRISM.startingPage, PRISM.endingPage,
     FRBR.embodiment, FRBR.partOf, FABIO.hasSequenceIdentifier, PRO.isDocumentContextFor,
     PRO.hasNext, PRO.withRole, PRO.isHeldBy, FOAF.givenName, FOAF.familyName, FOAF.name,
     DATACITE.hasIdentifier, DATACITE.usesIdentifierScheme, LITERAL.hasLiteralValue]
    + list(TYPE_CLASSES.values()) + list(ROLE_IRIS.values())
)


def graph_iri(entity_type: str) -> IRI:
    return IRI(f"{BASE_IRI}{entity_type}/")


def scheme_iri(scheme: str) -> IRI:
    return DATACITE.term(scheme)


class MappingError(ValueError):
    pass


def map_type(type_tag: str) -> IRI:
    """Class IRI for a type tag; anything unknown is a plain ``fabio:Expression``."""
    tag = (type_tag or "").strip().lower()
    cls = TYPE_CLASSES.get(tag)
    if cls is None:
        if tag:
            logger.warning("unknown type tag %r mapped to fabio:Expression", type_tag)
        return FABIO.Expression
    return cls


# ---------------------------------------------------------------------------
# flat records: one per OMID

@dataclass
class BrRecord:
    omid: OMID
    type: str = ""
    title: str = ""
    date: Optional[NormalizedDate] = None
    sequence: str = ""
    part_of: Optional[OMID] = None
    embodiment: Optional[OMID] = None
    roles: set = field(default_factory=set)
    ids: set = field(default_factory=set)


@dataclass
class ArRecord:
    omid: OMID
    role: str
    agent: OMID
    next: Optional[OMID] = None


@dataclass
class RaRecord:
    omid: OMID
    family: str = ""
    given: str = ""
    name: str = ""
    ids: set = field(default_factory=set)


@dataclass
class ReRecord:
    omid: OMID
    start: str = ""
    end: str = ""


@dataclass
class IdRecord:
    omid: OMID
    scheme: str
    value: str


Record = Union[BrRecord, ArRecord, RaRecord, ReRecord, IdRecord]


def _lit(text: str) -> Literal:
    return Literal(text)


def record_to_quads(record: Record) -> set:
    s = IRI(record.omid.iri)
    g = graph_iri(record.omid.entity_type)
    out = set()

    def add(p, o):
        out.add((s, p, o, g))

    if isinstance(record, BrRecord):
        add(RDF.type, FABIO.Expression)
        cls = map_type(record.type)
        if cls != FABIO.Expression:
            add(RDF.type, cls)
        if record.title:
            add(DCTERMS.title, _lit(record.title))
        if record.date is not None:
            add(PRISM.publicationDate, Literal(str(record.date), DATE_TYPES[record.date.precision]))
        if record.sequence:
            add(FABIO.hasSequenceIdentifier, _lit(record.sequence))
        if record.part_of is not None:
            add(FRBR.partOf, IRI(record.part_of.iri))
        if record.embodiment is not None:
            add(FRBR.embodiment, IRI(record.embodiment.iri))
        for ar in record.roles:
            add(PRO.isDocumentContextFor, IRI(ar.iri))
        for ident in record.ids:
            add(DATACITE.hasIdentifier, IRI(ident.iri))
    elif isinstance(record, ArRecord):
        add(RDF.type, PRO.RoleInTime)
        add(PRO.withRole, ROLE_IRIS[record.role])
        add(PRO.isHeldBy, IRI(record.agent.iri))
        if record.next is not None:
            add(PRO.hasNext, IRI(record.next.iri))
    elif isinstance(record, RaRecord):
        add(RDF.type, FOAF.Agent)
        if record.given:
            add(FOAF.givenName, _lit(record.given))
        if record.family:
            add(FOAF.familyName, _lit(record.family))
        if record.name:
            add(FOAF.name, _lit(record.name))
        for ident in record.ids:
            add(DATACITE.hasIdentifier, IRI(ident.iri))
    elif isinstance(record, ReRecord):
        add(RDF.type, FABIO.Manifestation)
        if record.start:
            add(PRISM.startingPage, _lit(record.start))
        if record.end:
            add(PRISM.endingPage, _lit(record.end))
    elif isinstance(record, IdRecord):
        add(RDF.type, DATACITE.Identifier)
        add(DATACITE.usesIdentifierScheme, scheme_iri(record.scheme))
        add(LITERAL.hasLiteralValue, _lit(record.value))
    else:
        raise TypeError(f"not a record: {record!r}")
    return out


def _omid(term) -> OMID:
    return OMID.parse(str(term))


def _date(literal: Literal) -> Optional[NormalizedDate]:
    from .normalize import parse_date

    return parse_date(literal.lexical)


def quads_to_record(subject: str, quads: Iterable) -> Record:
    """Rebuild the record of one subject from its quads."""
    omid = _omid(subject)
    kind = omid.entity_type
    po = [(p, o) for _, p, o, _ in quads]
    if kind == "br":
        rec = BrRecord(omid)
        for p, o in po:
            if p == RDF.type and o in CLASS_TYPES:
                rec.type = CLASS_TYPES[o]
            elif p == DCTERMS.title:
                rec.title = o.lexical
            elif p == PRISM.publicationDate:
                rec.date = _date(o)
            elif p == FABIO.hasSequenceIdentifier:
                rec.sequence = o.lexical
            elif p == FRBR.partOf:
                rec.part_of = _omid(o)
            elif p == FRBR.embodiment:
                rec.embodiment = _omid(o)
            elif p == PRO.isDocumentContextFor:
                rec.roles.add(_omid(o))
            elif p == DATACITE.hasIdentifier:
                rec.ids.add(_omid(o))
        return rec
    if kind == "ar":
        role = agent = nxt = None
        for p, o in po:
            if p == PRO.withRole:
                role = IRI_ROLES[o]
            elif p == PRO.isHeldBy:
                agent = _omid(o)
            elif p == PRO.hasNext:
                nxt = _omid(o)
        return ArRecord(omid, role, agent, nxt)
    if kind == "ra":
        rec = RaRecord(omid)
        for p, o in po:
            if p == FOAF.givenName:
                rec.given = o.lexical
            elif p == FOAF.familyName:
                rec.family = o.lexical
            elif p == FOAF.name:
                rec.name = o.lexical
            elif p == DATACITE.hasIdentifier:
                rec.ids.add(_omid(o))
        return rec
    if kind == "re":
        rec = ReRecord(omid)
        for p, o in po:
            if p == PRISM.startingPage:
                rec.start = o.lexical
            elif p == PRISM.endingPage:
                rec.end = o.lexical
        return rec
    scheme = value = None
    for p, o in po:
        if p == DATACITE.usesIdentifierScheme:
            scheme = str(o)[len(DATACITE.base):]
        elif p == LITERAL.hasLiteralValue:
            value = o.lexical
    return IdRecord(omid, scheme, value)


def quads_to_records(quads: Iterable) -> dict:
    by_subject: dict = {}
    for quad in quads:
        by_subject.setdefault(quad[0], []).append(quad)
    return {_omid(s): quads_to_record(s, qs) for s, qs in by_subject.items()}


# ---------------------------------------------------------------------------
# tree <-> records

def _need(omid, what: str) -> OMID:
    if omid is None:
        raise MappingError(f"{what} has no OMID; curate it before mapping")
    return omid


def _id_records(ids: list[ExternalId], owner: str) -> list[IdRecord]:
    return [IdRecord(_need(e.omid, f"identifier {e} of {owner}"), e.scheme, e.value) for e in ids]


def flatten(entity: CuratedEntity) -> dict:
    """All records reachable from ``entity``, keyed by OMID."""
    out: dict = {}
    _flatten_into(entity, out)
    return out


def _flatten_into(entity: CuratedEntity, out: dict) -> OMID:
    omid = _need(entity.omid, f"bibliographic resource {entity.title!r}")
    rec = BrRecord(omid, entity.type, entity.title, entity.date, entity.sequence)
    for ident in _id_records(entity.ids, str(omid)):
        out[ident.omid] = ident
        rec.ids.add(ident.omid)
    if entity.pages is not None:
        re_omid = _need(entity.pages.omid, f"pages of {omid}")
        out[re_omid] = ReRecord(re_omid, entity.pages.start, entity.pages.end)
        rec.embodiment = re_omid
    for kind in ROLE_KINDS:
        roles = entity.roles(kind)
        ar_ids = [_need(r.omid, f"{kind} role of {omid}") for r in roles]
        for i, role in enumerate(roles):
            agent = role.agent
            ra_omid = _need(agent.omid, f"agent {agent.display_name()!r}")
            ra = RaRecord(ra_omid, agent.family, agent.given, agent.name)
            for ident in _id_records(agent.ids, str(ra_omid)):
                out[ident.omid] = ident
                ra.ids.add(ident.omid)
            out[ra_omid] = ra
            nxt = ar_ids[i + 1] if i + 1 < len(ar_ids) else None
            out[ar_ids[i]] = ArRecord(ar_ids[i], kind, ra_omid, nxt)
            rec.roles.add(ar_ids[i])
    if entity.container is not None:
        rec.part_of = _flatten_into(entity.container, out)
    out[omid] = rec
    return omid


def map_entity(entity: CuratedEntity) -> set:
    quads = set()
    for record in flatten(entity).values():
        quads |= record_to_quads(record)
    return quads


def ordered_roles(br: BrRecord, records, kind: str) -> list[ArRecord]:
    """Walk the ``hasNext`` chain of one role kind; raises on cycles or forks."""
    roles = [records[a] for a in br.roles if a in records and records[a].role == kind]
    if not roles:
        return []
    pointed = {r.next for r in roles if r.next is not None}
    heads = [r for r in roles if r.omid not in pointed]
    if len(heads) != 1:
        raise MappingError(f"{br.omid}: {kind} chain has {len(heads)} heads")
    by_id = {r.omid: r for r in roles}
    out, node, seen = [], heads[0], set()
    while node is not None:
        if node.omid in seen:
            raise MappingError(f"{br.omid}: cycle in {kind} chain")
        seen.add(node.omid)
        out.append(node)
        node = by_id.get(node.next) if node.next is not None else None
    if len(out) != len(roles):
        raise MappingError(f"{br.omid}: {kind} chain is broken")
    return out


def _ext_ids(id_omids, records) -> list[ExternalId]:
    out = []
    for omid in sorted(id_omids):
        rec = records.get(omid)
        if rec is not None:
            out.append(ExternalId(rec.scheme, rec.value, omid=omid))
    return sorted(out, key=lambda e: (e.scheme, e.value))


def assemble(omid: OMID, records) -> CuratedEntity:
    """Rebuild the tree view of a br from flat records (any Mapping OMID -> record)."""
    return _assemble(omid, records, set())


def _assemble(omid: OMID, records, seen: set) -> CuratedEntity:
    if omid in seen:
        raise MappingError(f"partOf cycle through {omid}")
    seen = seen | {omid}
    br = records[omid]
    entity = CuratedEntity(omid=omid, ids=_ext_ids(br.ids, records), title=br.title,
                           date=br.date, type=br.type, sequence=br.sequence)
    for kind in ROLE_KINDS:
        roles = []
        for ar in ordered_roles(br, records, kind):
            ra = records[ar.agent]
            agent = Agent(ra.family, ra.given, ra.name, _ext_ids(ra.ids, records), ra.omid)
            roles.append(AgentRole(kind, agent, ar.omid))
        entity.set_roles(kind, roles)
    if br.embodiment is not None and br.embodiment in records:
        re_rec = records[br.embodiment]
        entity.pages = Pages(re_rec.start, re_rec.end, re_rec.omid)
    if br.part_of is not None and br.part_of in records:
        entity.container = _assemble(br.part_of, records, seen)
    return entity


def entity_nquads(entity: CuratedEntity) -> bytes:
    return serialize_nquads(map_entity(entity))
