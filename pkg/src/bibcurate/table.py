"""The eleven-column CSV exchange format and the micro-syntax inside its cells.

Cell grammar (normative for this package):

* people cells: people separated by ``;``; a person is ``Family, Given``
  optionally followed by ``[scheme:value scheme:value ...]``. A name with no
  comma is taken as an organisation.
* venue / publisher cells: ``Name [scheme:value ...]``.
* id cells: space-separated ``scheme:value`` tokens.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Optional

from .ids import ExternalId, NormalizationError, display_value, parse_token
from .model import (ISSUE_TYPE, VOLUME_TYPE, Agent, AgentRole, CuratedEntity, Diagnostic,
                    Pages, AUTHOR, EDITOR, PUBLISHER)
from .normalize import parse_date, parse_pages, render_pages
from .omid import OMID

COLUMNS = ("id", "title", "author", "editor", "pub_date", "venue", "volume", "issue",
           "page", "type", "publisher")


class StructuralError(ValueError):
    """A row that does not have the eleven expected fields."""

    def __init__(self, row: Optional[int], message: str):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


class CellParseError(ValueError):
    def __init__(self, cell: str, message: str):
        super().__init__(f"{message}: {cell!r}")
        self.cell = cell


@dataclass
class InputRecord:
    id_cell: str = ""
    title: str = ""
    author: str = ""
    editor: str = ""
    pub_date: str = ""
    venue: str = ""
    volume: str = ""
    issue: str = ""
    page: str = ""
    type: str = ""
    publisher: str = ""

    def as_list(self) -> list[str]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class PersonSpec:
    family_name: str = ""
    given_name: str = ""
    name: str = ""
    ids: list[ExternalId] = field(default_factory=list)
    is_organization: bool = False


@dataclass
class VenueSpec:
    name: str = ""
    ids: list[ExternalId] = field(default_factory=list)


Reporter = Optional[Callable[[str], None]]


def parse_row(raw_fields: list[str], row_index: Optional[int] = None) -> InputRecord:
    if len(raw_fields) != len(COLUMNS):
        raise StructuralError(row_index, f"expected {len(COLUMNS)} fields, got {len(raw_fields)}")
    return InputRecord(*[(value or "") for value in raw_fields])


def parse_id_cell(cell: str, report: Reporter = None) -> list[ExternalId]:
    """Space-separated ``scheme:value`` tokens, deduplicated in order.

    Bad tokens are skipped and passed to ``report``.
    """
    out: list[ExternalId] = []
    seen = set()
    for token in (cell or "").split():
        try:
            ext = parse_token(token)
        except (ValueError, NormalizationError) as exc:
            if report:
                report(str(exc))
            continue
        if ext not in seen:
            seen.add(ext)
            out.append(ext)
    return out


def _split_outside_brackets(cell: str, sep: str = ";") -> list[str]:
    parts, depth, current = [], 0, []
    for ch in cell:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise CellParseError(cell, "unbalanced ']'")
        if ch == sep and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise CellParseError(cell, "unbalanced '['")
    parts.append("".join(current))
    return parts


def _split_name_ids(chunk: str, cell: str) -> tuple[str, str]:
    chunk = chunk.strip()
    open_at = chunk.find("[")
    if open_at < 0:
        if "]" in chunk:
            raise CellParseError(cell, "unbalanced ']'")
        return chunk, ""
    if not chunk.endswith("]") or chunk.count("[") != 1 or chunk.count("]") != 1:
        raise CellParseError(cell, "identifier brackets must close the entry")
    return chunk[:open_at].strip(), chunk[open_at + 1:-1].strip()


def parse_people_cell(cell: str, organizations: bool = False,
                      report: Reporter = None) -> list[PersonSpec]:
    """Parse ``Family, Given [ids]; ...``.

    With ``organizations=True`` every entry is an organisation name, so
    commas inside names (``Elsevier, Inc.``) are kept.
    """
    if not (cell or "").strip():
        return []
    people = []
    for chunk in _split_outside_brackets(cell):
        if not chunk.strip():
            continue
        name, id_text = _split_name_ids(chunk, cell)
        ids = parse_id_cell(id_text, report)
        if organizations or "," not in name:
            people.append(PersonSpec(name=name, ids=ids, is_organization=True))
        else:
            family, _, given = name.partition(",")
            people.append(PersonSpec(family.strip(), given.strip(), ids=ids))
    return people


def parse_venue_cell(cell: str, report: Reporter = None) -> Optional[VenueSpec]:
    if not (cell or "").strip():
        return None
    _split_outside_brackets(cell)  # balance check
    name, id_text = _split_name_ids(cell, cell)
    return VenueSpec(name, parse_id_cell(id_text, report))


# ---------------------------------------------------------------------------
# reading and writing whole files

def read_rows(data, diagnostics: Optional[list] = None) -> list[tuple[int, InputRecord]]:
    """Parse CSV text/bytes into ``(row_number, record)`` pairs.

    Row numbers count data rows from 1. A header naming the eleven columns is
    required; columns may appear in any order. Rows with the wrong arity are
    reported and skipped.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(data))
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip().lower() for h in header]
    if sorted(header) != sorted(COLUMNS):
        raise StructuralError(0, f"header must name the columns {', '.join(COLUMNS)}; got {header}")
    order = [header.index(name) for name in COLUMNS]
    out = []
    for number, raw in enumerate(reader, start=1):
        if not raw or all(not cell.strip() for cell in raw) and len(raw) <= 1:
            continue
        try:
            if len(raw) != len(COLUMNS):
                raise StructuralError(number, f"expected {len(COLUMNS)} fields, got {len(raw)}")
            out.append((number, parse_row([raw[i] for i in order], number)))
        except StructuralError as exc:
            if diagnostics is None:
                raise
            diagnostics.append(Diagnostic(number, "*", str(exc), "quarantined"))
    return out


def _id_tokens(ids: Iterable[ExternalId], omid: Optional[OMID], include_omids: bool) -> list[str]:
    tokens = [f"omid:{omid}"] if (include_omids and omid is not None) else []
    for ext in sorted(ids, key=lambda e: (e.scheme, e.value)):
        if ext.scheme == "omid":
            continue
        tokens.append(f"{ext.scheme}:{display_value(ext)}")
    return tokens


def format_agent(agent: Agent, include_omids: bool = True) -> str:
    tokens = _id_tokens(agent.ids, agent.omid, include_omids)
    name = agent.display_name()
    return f"{name} [{' '.join(tokens)}]" if tokens else name


def format_venue(venue: Optional[CuratedEntity], include_omids: bool = True) -> str:
    if venue is None:
        return ""
    tokens = _id_tokens(venue.ids, venue.omid, include_omids)
    if not tokens:
        return venue.title
    return f"{venue.title} [{' '.join(tokens)}]" if venue.title else f"[{' '.join(tokens)}]"


def entity_to_row(entity: CuratedEntity, include_omids: bool = True) -> dict[str, str]:
    issue, volume, venue = entity.chain()

    def people(roles: list[AgentRole]) -> str:
        return "; ".join(format_agent(r.agent, include_omids) for r in roles)

    return {
        "id": " ".join(_id_tokens(entity.ids, entity.omid, include_omids)),
        "title": entity.title,
        "author": people(entity.authors),
        "editor": people(entity.editors),
        "pub_date": str(entity.date) if entity.date else "",
        "venue": format_venue(venue, include_omids),
        "volume": volume.sequence if volume else "",
        "issue": issue.sequence if issue else "",
        "page": render_pages(entity.pages.start, entity.pages.end) if entity.pages else "",
        "type": entity.type,
        "publisher": people(entity.publishers),
    }


def write_curated_csv(batch: Iterable[CuratedEntity], include_omids: bool = True) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for entity in batch:
        row = entity_to_row(entity, include_omids)
        writer.writerow([row[c] for c in COLUMNS])
    return buffer.getvalue().encode("utf-8")


def _split_omid(ids: list[ExternalId]) -> tuple[Optional[OMID], list[ExternalId]]:
    omid, rest = None, []
    for ext in ids:
        if ext.scheme == "omid" and omid is None:
            omid = OMID.parse(ext.value)
        elif ext.scheme != "omid":
            rest.append(ext)
    return omid, rest


def _agents(cell: str, kind: str) -> list[AgentRole]:
    roles = []
    for spec in parse_people_cell(cell, organizations=(kind == PUBLISHER)):
        omid, ids = _split_omid(spec.ids)
        agent = Agent(spec.family_name, spec.given_name, spec.name, ids, omid)
        roles.append(AgentRole(kind, agent))
    return roles


def record_to_entity(record: InputRecord) -> CuratedEntity:
    """Literal reading of an already curated row; no normalization."""
    omid, ids = _split_omid(parse_id_cell(record.id_cell))
    container = None
    venue_spec = parse_venue_cell(record.venue)
    if venue_spec is not None:
        v_omid, v_ids = _split_omid(venue_spec.ids)
        container = CuratedEntity(omid=v_omid, ids=v_ids, title=venue_spec.name)
    if record.volume:
        container = CuratedEntity(type=VOLUME_TYPE, sequence=record.volume, container=container)
    if record.issue:
        container = CuratedEntity(type=ISSUE_TYPE, sequence=record.issue, container=container)
    pages = parse_pages(record.page)
    return CuratedEntity(
        omid=omid, ids=ids, title=record.title, date=parse_date(record.pub_date),
        type=record.type, authors=_agents(record.author, AUTHOR),
        editors=_agents(record.editor, EDITOR), publishers=_agents(record.publisher, PUBLISHER),
        pages=Pages(*pages) if pages else None, container=container,
    )


def read_curated_csv(data) -> list[CuratedEntity]:
    return [record_to_entity(record) for _, record in read_rows(data)]
