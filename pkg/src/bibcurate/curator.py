"""Deduplication and merging of incoming rows against the store.

``decide`` picks one of six outcomes for an entity given its external ids,
the OMID written in the CSV (if any) and the resolution index. ``merge``
combines two tree-shaped entities with the surviving side taking
precedence. ``Curator`` drives a whole batch: it normalizes rows, clusters
rows that describe the same resource, resolves each cluster against the
store, gives every sub-entity an OMID and commits the changes together with
their provenance.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Callable, Iterable, Optional

from .ids import ExternalId, ExistenceCache, screen_ids
from .model import (AUTHOR, EDITOR, ISSUE_TYPE, PUBLISHER, ROLE_KINDS, VOLUME_TYPE, Agent,
                    AgentRole, CuratedEntity, Diagnostic, Pages)
from .normalize import (DEFAULT_KEYWORDS, KeywordTable, fold_hyphens, fold_spaces,
                        parse_date, parse_pages, repair_volume_issue, title_case)
from .ocdm import (TYPE_CLASSES, ArRecord, BrRecord, IdRecord, RaRecord, ReRecord, assemble,
                   quads_to_records, record_to_quads)
from .omid import OMID, Minter, ResolutionIndex
from .provenance import ProvenanceStore, utc
from .table import InputRecord, parse_id_cell, parse_people_cell, parse_venue_cell

logger = logging.getLogger(__name__)

NEW = "new"
MERGE_SINGLE = "merge_single"
CONFLICT_NEW = "conflict_new"
OMID_UPDATE = "omid_update"
OMID_MERGE = "omid_merge"
OMID_CONFLICT_MERGE = "omid_conflict_merge"
CASES = (NEW, MERGE_SINGLE, CONFLICT_NEW, OMID_UPDATE, OMID_MERGE, OMID_CONFLICT_MERGE)
QUARANTINED = "quarantined"

DEFAULT_AGENT = "https://w3id.org/oc/meta/prov/pa/1"

# container type implied by the type of the resource it contains
VENUE_TYPES = {
    "journal article": "journal",
    "journal issue": "journal",
    "journal volume": "journal",
    "book chapter": "book",
    "book part": "book",
    "book section": "book",
    "book": "book series",
    "proceedings article": "proceedings",
    "reference entry": "reference book",
    "peer review": "journal",
}


class UnknownOmidError(ValueError):
    """The CSV names an OMID the store has never issued (or has deleted)."""


@dataclass(frozen=True)
class ResolutionOutcome:
    case: str
    target: Optional[OMID]
    merged_away: frozenset = frozenset()
    conflicts: frozenset = frozenset()

    @property
    def number(self) -> int:
        return CASES.index(self.case) + 1


def branch_predicates(has_ids: bool, csv_omid: Optional[OMID], hits: set) -> dict[str, bool]:
    """Truth value of every branch condition; exactly one is true for any input."""
    k = csv_omid
    return {
        NEW: k is None and not hits,
        MERGE_SINGLE: k is None and len(hits) == 1,
        CONFLICT_NEW: k is None and len(hits) >= 2,
        OMID_UPDATE: k is not None and not has_ids,
        OMID_MERGE: k is not None and has_ids and hits <= {k},
        OMID_CONFLICT_MERGE: k is not None and not hits <= {k},
    }


def decide(entity_ids: list[ExternalId], csv_omid: Optional[OMID], index: ResolutionIndex,
           entity_type: str = "br", mint: Optional[Callable[[str], OMID]] = None) -> ResolutionOutcome:
    """Choose the outcome for one entity.

    ``target`` is the OMID the entity ends up with; for the two minting
    branches it is only filled when ``mint`` is given.

    Raises:
        UnknownOmidError: ``csv_omid`` is not a live entity of the index.
    """
    ids = [e for e in entity_ids if e.scheme != "omid"]
    if csv_omid is not None:
        if not index.knows(csv_omid):
            raise UnknownOmidError(f"{csv_omid} does not exist")
        csv_omid = index.chase(csv_omid)
        if not index.is_live(csv_omid):
            raise UnknownOmidError(f"{csv_omid} has been deleted")
    hits = index.resolve(ids, entity_type)
    fired = [case for case, ok in branch_predicates(bool(ids), csv_omid, hits).items() if ok]
    assert len(fired) == 1, fired
    case = fired[0]
    if case in (NEW, CONFLICT_NEW):
        target = mint(entity_type) if mint else None
        return ResolutionOutcome(case, target, conflicts=frozenset(hits) if case == CONFLICT_NEW else frozenset())
    if case == MERGE_SINGLE:
        return ResolutionOutcome(case, next(iter(hits)))
    return ResolutionOutcome(case, csv_omid, conflicts=frozenset(hits - {csv_omid}))


# ---------------------------------------------------------------------------
# merging trees

def _union_ids(first: list[ExternalId], second: list[ExternalId]) -> list[ExternalId]:
    out, seen = [], set()
    for ext in list(first) + list(second):
        if ext not in seen:
            seen.add(ext)
            out.append(ext)
    return out


def agents_match(a: Agent, b: Agent) -> bool:
    """Same agent by OMID, by a shared id, or by name when one side has no ids."""
    if a.omid is not None and b.omid is not None:
        return a.omid == b.omid
    if set(a.ids) & set(b.ids):
        return True
    if a.ids and b.ids:
        return False
    if a.is_organization != b.is_organization:
        return False
    key = a.name_key()
    return any(key) and key == b.name_key()


def merge_agent(a: Agent, b: Agent) -> Agent:
    return Agent(a.family or b.family, a.given or b.given, a.name or b.name,
                 _union_ids(a.ids, b.ids), a.omid or b.omid)


def merge_roles(surviving: list[AgentRole], incoming: list[AgentRole]) -> list[AgentRole]:
    """Keep the surviving order and append people it does not know yet."""
    out = [AgentRole(r.role, replace(r.agent, ids=list(r.agent.ids)), r.omid) for r in surviving]
    used = set()
    for role in incoming:
        for j, have in enumerate(out):
            if j not in used and agents_match(have.agent, role.agent):
                used.add(j)
                have.agent = merge_agent(have.agent, role.agent)
                break
        else:
            used.add(len(out))
            out.append(AgentRole(role.role, replace(role.agent, ids=list(role.agent.ids)), role.omid))
    return out


def container_levels(container: Optional[CuratedEntity]):
    return CuratedEntity(container=container).chain()


def _merge_container(s: Optional[CuratedEntity], i: Optional[CuratedEntity], note) -> Optional[CuratedEntity]:
    if s is None and i is None:
        return None
    s_issue, s_volume, s_venue = container_levels(s)
    i_issue, i_volume, i_venue = container_levels(i)
    if s_venue is not None and i_venue is not None:
        if s_venue.omid is not None and i_venue.omid is not None and s_venue.omid != i_venue.omid:
            note(f"venue {i_venue.omid} ignored in favour of {s_venue.omid}")
            venue = merge(s_venue, CuratedEntity(), note=note)
        else:
            venue = merge(s_venue, i_venue, note=note)
    else:
        venue = merge(s_venue or i_venue, CuratedEntity(), note=note) if (s_venue or i_venue) else None

    def level(a, b, what):
        if a is not None and b is not None and a.sequence != b.sequence:
            note(f"{what} {b.sequence!r} differs from {a.sequence!r}; kept {a.sequence!r}")
        pick = a if a is not None else b
        return replace(pick, container=None, ids=list(pick.ids)) if pick is not None else None

    volume = level(s_volume, i_volume, "volume")
    issue = level(s_issue, i_issue, "issue")
    top = venue
    if volume is not None:
        volume.container = top
        top = volume
    if issue is not None:
        issue.container = top
        top = issue
    return top


def merge(surviving: CuratedEntity, incoming: CuratedEntity, surviving_is_stored: bool = True,
          note: Optional[Callable[[str], None]] = None) -> CuratedEntity:
    """Field-wise merge; the surviving entity's values win.

    ``surviving_is_stored`` only changes the wording of logged contradictions.
    """
    origin = "stored" if surviving_is_stored else "first"

    def log(message: str) -> None:
        if note is not None:
            note(message)
        else:
            logger.info(message)

    if surviving.type and incoming.type and surviving.type != incoming.type:
        log(f"type {incoming.type!r} contradicts {origin} type {surviving.type!r}; kept {surviving.type!r}")
    if surviving.date is not None and incoming.date is not None and surviving.date != incoming.date:
        log(f"date {incoming.date} differs from {origin} date {surviving.date}; kept {surviving.date}")
    if surviving.title and incoming.title and surviving.title != incoming.title:
        log(f"title {incoming.title!r} differs from {origin} title; kept {surviving.title!r}")
    out = CuratedEntity(
        omid=surviving.omid or incoming.omid,
        ids=_union_ids(surviving.ids, incoming.ids),
        title=surviving.title or incoming.title,
        date=surviving.date if surviving.date is not None else incoming.date,
        type=surviving.type or incoming.type,
        sequence=surviving.sequence or incoming.sequence,
        pages=copy.copy(surviving.pages or incoming.pages),
        container=_merge_container(surviving.container, incoming.container, log),
    )
    for kind in ROLE_KINDS:
        out.set_roles(kind, merge_roles(surviving.roles(kind), incoming.roles(kind)))
    return out


# ---------------------------------------------------------------------------
# row normalization

class RowError(ValueError):
    pass


def _split_omid(ids: list[ExternalId]) -> tuple[Optional[OMID], list[ExternalId]]:
    omid, rest = None, []
    for ext in ids:
        if ext.scheme == "omid":
            if not ext.syntax_valid:
                raise RowError(f"malformed OMID {ext}")
            parsed = OMID.parse(ext.value)
            if omid is not None and parsed != omid:
                raise RowError(f"two OMIDs given: {omid} and {parsed}")
            omid = parsed
        else:
            rest.append(ext)
    return omid, rest


class RowNormalizer:
    """Turns a raw ``InputRecord`` into a clean, OMID-less ``CuratedEntity``."""

    def __init__(self, client=None, cache: Optional[ExistenceCache] = None,
                 keywords: KeywordTable = DEFAULT_KEYWORDS):
        self.client = client
        self.cache = cache
        self.keywords = keywords

    def ids(self, text: str, report) -> tuple[Optional[OMID], list[ExternalId]]:
        parsed = parse_id_cell(fold_hyphens(fold_spaces(text), "id"), report)
        omid, rest = _split_omid(parsed)
        return omid, screen_ids(rest, self.client, self.cache, report)

    def people(self, cell: str, kind: str, report) -> list[AgentRole]:
        org_only = kind == PUBLISHER
        text = fold_spaces(cell)
        if not org_only:
            text = fold_hyphens(text, kind)
        roles = []
        for spec in parse_people_cell(text, organizations=org_only, report=report):
            omid, ids = _split_omid(spec.ids)
            ids = screen_ids(ids, self.client, self.cache, report)
            if org_only:
                agent = Agent(name=spec.name, ids=ids, omid=omid)
            else:
                agent = Agent(title_case(spec.family_name), title_case(spec.given_name),
                              title_case(spec.name), ids, omid)
            if not (agent.family or agent.given or agent.name or agent.ids or agent.omid):
                continue
            roles.append(AgentRole(kind, agent))
        return roles

    def __call__(self, record: InputRecord, report: Callable[[str, str], None]) -> tuple[Optional[OMID], CuratedEntity]:
        """Return ``(csv_omid, entity)``; ``report(field, message)`` gets soft problems."""
        def on(field_name):
            return lambda message: report(field_name, message)

        omid, ids = self.ids(record.id_cell, on("id"))
        entity = CuratedEntity(ids=ids, title=title_case(fold_spaces(record.title)))

        date_text = fold_spaces(record.pub_date)
        if date_text:
            entity.date = parse_date(date_text)
            if entity.date is None:
                report("pub_date", f"discarded unparseable date {date_text!r}")
            elif str(entity.date) != date_text:
                report("pub_date", f"date {date_text!r} truncated to {entity.date}")

        type_tag = fold_spaces(record.type).lower()
        if type_tag and type_tag not in TYPE_CLASSES:
            report("type", f"unknown type {type_tag!r} dropped")
            type_tag = ""
        entity.type = type_tag

        entity.authors = self.people(record.author, AUTHOR, on("author"))
        entity.editors = self.people(record.editor, EDITOR, on("editor"))
        entity.publishers = self.people(record.publisher, PUBLISHER, on("publisher"))

        pages = parse_pages(record.page)
        if pages is not None:
            entity.pages = Pages(*pages)

        container = None
        venue = parse_venue_cell(fold_spaces(record.venue), on("venue"))
        if venue is not None:
            v_omid, v_ids = _split_omid(venue.ids)
            v_ids = screen_ids(v_ids, self.client, self.cache, on("venue"))
            if venue.name or v_ids or v_omid:
                container = CuratedEntity(omid=v_omid, ids=v_ids, title=title_case(venue.name),
                                          type=VENUE_TYPES.get(type_tag, ""))
        raw_volume = fold_hyphens(fold_spaces(record.volume), "volume")
        raw_issue = fold_hyphens(fold_spaces(record.issue), "issue")
        volume, issue = repair_volume_issue(raw_volume, raw_issue, self.keywords)
        if (volume, issue) != (raw_volume, raw_issue):
            report("volume", f"volume/issue {raw_volume!r}/{raw_issue!r} repaired to {volume!r}/{issue!r}")
        if volume:
            container = CuratedEntity(type=VOLUME_TYPE, sequence=volume, container=container)
        if issue:
            container = CuratedEntity(type=ISSUE_TYPE, sequence=issue, container=container)
        entity.container = container
        return omid, entity


# ---------------------------------------------------------------------------
# the stateful engine

class _Rollback(Exception):
    pass


@dataclass
class _Cluster:
    rows: list = field(default_factory=list)
    omid: Optional[OMID] = None
    entity: Optional[CuratedEntity] = None


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def system_clock() -> datetime:
    return datetime.now(timezone.utc)


class Curator:
    """Curation state over one provenance store.

    ``records`` mirrors the live data graphs as one flat record per OMID.
    The resolution index is rebuilt from the store unless one is supplied.
    """

    def __init__(self, prov: Optional[ProvenanceStore] = None, minter: Optional[Minter] = None,
                 index: Optional[ResolutionIndex] = None, agent: str = DEFAULT_AGENT,
                 source: Optional[str] = None, clock: Callable[[], datetime] = system_clock,
                 normalizer: Optional[RowNormalizer] = None):
        self.prov = prov if prov is not None else ProvenanceStore()
        self.minter = minter if minter is not None else Minter()
        self.agent = agent
        self.source = source
        self.clock = clock
        self.normalizer = normalizer if normalizer is not None else RowNormalizer()
        self.records: dict = quads_to_records(self.prov.store.data_quads())
        self.id_entities: dict[str, OMID] = {}
        self.children: dict[tuple, OMID] = {}
        self._index_structures()
        highest: dict[str, OMID] = {}
        for omid in self.prov.snapshots:
            if omid.supplier_prefix == self.minter.prefix:
                top = highest.get(omid.entity_type)
                if top is None or omid.sequence > top.sequence:
                    highest[omid.entity_type] = omid
        for omid in highest.values():
            self.minter.observe(omid)
        if index is None:
            index = self.rebuild_index()
        self.index = index
        self.prov.index = index
        self.last_commit = max((c[-1].generated_at for c in self.prov.snapshots.values()), default=None)
        self._dirty: set = set()
        self._undo: Optional[list] = None

    # -- derived lookups ---------------------------------------------------
    def _index_structures(self) -> None:
        for omid, rec in self.records.items():
            if isinstance(rec, IdRecord):
                self.id_entities[f"{rec.scheme}:{rec.value}"] = omid
            elif isinstance(rec, BrRecord) and rec.type in (VOLUME_TYPE, ISSUE_TYPE) and rec.part_of:
                self.children.setdefault((rec.part_of, rec.type, rec.sequence), omid)

    def _id_keys(self, id_omids) -> list[str]:
        keys = []
        for omid in id_omids:
            rec = self.records.get(omid)
            if isinstance(rec, IdRecord):
                keys.append(f"{rec.scheme}:{rec.value}")
        return keys

    def rebuild_index(self) -> ResolutionIndex:
        """Recover the resolution index from data and provenance alone."""
        index = self.prov.build_index()
        for omid in self.prov.snapshots:
            index.register(omid)
        for omid in self.records:
            index.register(omid)
        # ids of deleted entities first, so live holders override them
        for omid in sorted(index.dead):
            if omid.entity_type not in ("br", "ra"):
                continue
            old = quads_to_records(self.prov.last_state_before_deletion(omid)).get(omid)
            if old is None:
                continue
            for id_omid in old.ids:
                id_rec = self.records.get(id_omid)
                if id_rec is None:
                    state = self.prov.last_state_before_deletion(id_omid)
                    id_rec = quads_to_records(state).get(id_omid)
                if isinstance(id_rec, IdRecord):
                    index.bind(f"{id_rec.scheme}:{id_rec.value}", omid)
        for omid, rec in self.records.items():
            if isinstance(rec, (BrRecord, RaRecord)):
                for key in self._id_keys(rec.ids):
                    index.bind(key, omid)
        return index

    # -- undoable mutations ------------------------------------------------
    def _log(self, fn) -> None:
        if self._undo is not None:
            self._undo.append(fn)

    def _put(self, rec) -> None:
        omid = rec.omid
        had, old, was_dirty = omid in self.records, self.records.get(omid), omid in self._dirty

        def undo():
            if had:
                self.records[omid] = old
            else:
                self.records.pop(omid, None)
            if not was_dirty:
                self._dirty.discard(omid)

        self._log(undo)
        self.records[omid] = rec
        self._dirty.add(omid)

    def _set_map(self, table: dict, key, value) -> None:
        had, old = key in table, table.get(key)

        def undo():
            if had:
                table[key] = old
            else:
                table.pop(key, None)

        self._log(undo)
        table[key] = value

    def _bind(self, key: str, omid: OMID) -> None:
        slot = (omid.entity_type, key)
        old = self.index.bindings.get(slot)
        if old == omid:
            return

        def undo():
            if old is None:
                self.index.unbind(key, omid)
            else:
                self.index.bind(key, old)

        self._log(undo)
        self.index.bind(key, omid)

    def _mint(self, entity_type: str) -> OMID:
        omid = self.minter.mint(entity_type)
        self._log(lambda: self.index.entities.discard(omid))
        self.index.register(omid)
        return omid

    # -- public API --------------------------------------------------------
    def entity(self, omid: OMID) -> CuratedEntity:
        return assemble(omid, self.records)

    def curate_batch(self, records: Iterable, commit: bool = True):
        """Curate rows and (by default) commit them.

        ``records`` holds ``InputRecord`` values or ``(row_number, record)``
        pairs. Returns ``(entities, diagnostics)`` with one entity per group
        of rows describing the same resource, in order of first appearance.
        """
        rows = []
        for n, item in enumerate(records, start=1):
            rows.append(item if isinstance(item, tuple) else (n, item))
        diagnostics: list[Diagnostic] = []

        normalized = []
        for row, record in rows:
            def report(field_name, message, row=row):
                diagnostics.append(Diagnostic(row, field_name, message, "normalized"))
            try:
                csv_omid, entity = self.normalizer(record, report)
            except Exception as exc:  # noqa: BLE001 - any row failure quarantines the row
                diagnostics.append(Diagnostic(row, "*", str(exc), QUARANTINED))
                continue
            normalized.append((row, csv_omid, entity))

        clusters = self._cluster(normalized, diagnostics)
        out = []
        for cluster in clusters:
            self._undo = []
            try:
                omid = self._resolve_cluster(cluster, diagnostics)
            except Exception as exc:  # noqa: BLE001
                for fn in reversed(self._undo):
                    fn()
                for row in cluster.rows:
                    diagnostics.append(Diagnostic(row, "*", str(exc), QUARANTINED))
                continue
            finally:
                self._undo = None
            out.append(omid)
        if commit:
            self.commit()
        return [self.entity(omid) for omid in out], diagnostics

    def _cluster(self, normalized, diagnostics) -> list[_Cluster]:
        """Group rows sharing an id or an OMID; a group never holds two OMIDs."""
        uf = _UnionFind()
        cluster_omid: dict[int, Optional[OMID]] = {}
        first_holder: dict[str, int] = {}
        for pos, (row, csv_omid, entity) in enumerate(normalized):
            uf.find(pos)
            cluster_omid[pos] = csv_omid
            keys = [str(e) for e in entity.ids]
            if csv_omid is not None:
                keys.append(f"omid:{csv_omid}")
            for key in keys:
                if key not in first_holder:
                    first_holder[key] = pos
                    continue
                a, b = uf.find(pos), uf.find(first_holder[key])
                if a == b:
                    continue
                ka, kb = cluster_omid.get(a), cluster_omid.get(b)
                if ka is not None and kb is not None and ka != kb:
                    diagnostics.append(Diagnostic(row, "id", f"{key} also names a row with OMID {kb}; "
                                                  f"rows kept apart", OMID_CONFLICT_MERGE))
                    continue
                uf.union(a, b)
                cluster_omid[uf.find(a)] = ka or kb
        groups: dict = {}
        order = []
        for pos, item in enumerate(normalized):
            root = uf.find(pos)
            if root not in groups:
                groups[root] = _Cluster(omid=cluster_omid.get(root))
                order.append(root)
            cluster = groups[root]
            row, _, entity = item
            cluster.rows.append(row)
            if cluster.entity is None:
                cluster.entity = entity
            else:
                cluster.entity = merge(cluster.entity, entity, surviving_is_stored=False,
                                       note=lambda m, row=row: diagnostics.append(
                                           Diagnostic(row, "br", m, MERGE_SINGLE)))
        return [groups[root] for root in order]

    def _note(self, diagnostics, rows, field_name, branch):
        row = rows[0] if rows else None
        return lambda message: diagnostics.append(Diagnostic(row, field_name, message, branch))

    def _resolve_cluster(self, cluster: _Cluster, diagnostics) -> OMID:
        incoming = cluster.entity
        rows = cluster.rows
        outcome = decide(incoming.ids, cluster.omid, self.index, "br")
        note = self._note(diagnostics, rows, "br", outcome.case)
        self._note_deleted(incoming.ids, "br", note)
        if outcome.conflicts:
            names = ", ".join(sorted(str(o) for o in outcome.conflicts))
            conflicting = [e for e in incoming.ids
                           if self.index.lookup("br", str(e)) not in (None, outcome.target)]
            incoming = replace(incoming, ids=[e for e in incoming.ids if e not in conflicting])
            note(f"ids {' '.join(map(str, conflicting))} belong to {names}; left with their owners")
        if outcome.case in (NEW, CONFLICT_NEW):
            target = None
            if outcome.case == CONFLICT_NEW:
                conflict_key = tuple(sorted(str(e) for e in cluster.entity.ids))
                target = self.index.conflicts.get(conflict_key)
                if target is not None and not self.index.is_live(target):
                    target = None
                if target is None:
                    target = self._mint("br")
                    self._set_map(self.index.conflicts, conflict_key, target)
                merged = merge(self.entity(target), incoming, note=note) if target in self.records \
                    else replace(incoming, omid=target)
            else:
                merged = incoming
        else:
            target = outcome.target
            merged = merge(self.entity(target), incoming, note=note)
        note(f"resolved to {target}" if target else "new entity")
        return self._materialize_br(merged, note)

    def _note_deleted(self, ids, entity_type, note) -> None:
        for ext in ids:
            owner = self.index.deleted_owner(entity_type, str(ext))
            if owner is not None and self.index.lookup(entity_type, str(ext)) is None:
                note(f"{ext} belonged to deleted entity {owner}; treated as unknown")

    # -- materialization ---------------------------------------------------
    def _id_entity(self, ext: ExternalId) -> OMID:
        key = str(ext)
        omid = self.id_entities.get(key)
        if omid is None or omid not in self.records:
            omid = self._mint("id")
            self._put(IdRecord(omid, ext.scheme, ext.value))
            self._set_map(self.id_entities, key, omid)
        return omid

    def _attach_ids(self, owner: OMID, ids: list[ExternalId], current: set, note) -> set:
        out = set(current)
        for ext in ids:
            holder = self.index.lookup(owner.entity_type, str(ext))
            if holder is not None and holder != owner:
                note(f"{ext} already identifies {holder}; not attached to {owner}")
                continue
            out.add(self._id_entity(ext))
            self._bind(str(ext), owner)
        return out

    def _materialize_br(self, entity: CuratedEntity, note) -> OMID:
        omid = entity.omid or self._mint("br")
        old = self.records.get(omid)
        rec = BrRecord(omid, entity.type, entity.title, entity.date, entity.sequence)
        if isinstance(old, BrRecord):
            rec.part_of, rec.embodiment = old.part_of, old.embodiment
        rec.ids = self._attach_ids(omid, entity.ids, old.ids if isinstance(old, BrRecord) else set(), note)
        if entity.pages is not None:
            rec.embodiment = self._materialize_pages(entity.pages, rec.embodiment)
        rec.roles = set(old.roles) if isinstance(old, BrRecord) else set()
        for kind in ROLE_KINDS:
            rec.roles |= self._materialize_roles(entity.roles(kind), kind, note)
        if entity.container is not None:
            rec.part_of = self._materialize_container(entity.container, note)
        self._put_if_changed(rec)
        return omid

    def _put_if_changed(self, rec) -> None:
        if self.records.get(rec.omid) != rec:
            self._put(rec)

    def _materialize_pages(self, pages: Pages, current: Optional[OMID]) -> OMID:
        omid = pages.omid or current or self._mint("re")
        old = self.records.get(omid)
        rec = ReRecord(omid, pages.start, pages.end)
        if isinstance(old, ReRecord):
            rec = ReRecord(omid, old.start or pages.start, old.end or pages.end)
        self._put_if_changed(rec)
        return omid

    def _materialize_roles(self, roles: list[AgentRole], kind: str, note) -> set:
        ar_ids = []
        agents = []
        for role in roles:
            agents.append(self._materialize_agent(role.agent, note))
            ar_ids.append(role.omid or self._mint("ar"))
        for i, ar in enumerate(ar_ids):
            nxt = ar_ids[i + 1] if i + 1 < len(ar_ids) else None
            self._put_if_changed(ArRecord(ar, kind, agents[i], nxt))
        return set(ar_ids)

    def _materialize_agent(self, agent: Agent, note) -> OMID:
        if agent.omid is not None and agent.omid in self.records:
            target = agent.omid
        else:
            outcome = decide(agent.ids, agent.omid, self.index, "ra")
            self._note_deleted(agent.ids, "ra", note)
            if outcome.conflicts:
                note(f"agent ids {' '.join(map(str, agent.ids))} span {sorted(map(str, outcome.conflicts))}")
                agent = replace(agent, ids=[e for e in agent.ids
                                            if self.index.lookup("ra", str(e)) in (None, outcome.target)])
            target = outcome.target
        old = self.records.get(target) if target is not None else None
        if isinstance(old, RaRecord):
            rec = RaRecord(target, old.family or agent.family, old.given or agent.given,
                           old.name or agent.name, set(old.ids))
        else:
            target = self._mint("ra")
            rec = RaRecord(target, agent.family, agent.given, agent.name)
        rec.ids = self._attach_ids(target, agent.ids, rec.ids, note)
        self._put_if_changed(rec)
        return target

    def _materialize_venue(self, venue: CuratedEntity, note) -> OMID:
        if venue.omid is not None and venue.omid in self.records:
            target = venue.omid
        else:
            outcome = decide(venue.ids, venue.omid, self.index, "br")
            self._note_deleted(venue.ids, "br", note)
            target = outcome.target
            if outcome.conflicts:
                note(f"venue ids {' '.join(map(str, venue.ids))} span {sorted(map(str, outcome.conflicts))}")
                if outcome.case == CONFLICT_NEW:
                    target = None
        old = self.records.get(target) if target is not None else None
        if isinstance(old, BrRecord):
            rec = replace(old, title=old.title or venue.title, type=old.type or venue.type,
                          ids=set(old.ids), roles=set(old.roles))
        else:
            target = self._mint("br")
            rec = BrRecord(target, venue.type, venue.title)
        rec.ids = self._attach_ids(target, venue.ids, rec.ids, note)
        self._put_if_changed(rec)
        return target

    def _child(self, parent: Optional[OMID], kind: str, level: CuratedEntity) -> OMID:
        if level.omid is not None and level.omid in self.records:
            old = self.records[level.omid]
            if old.part_of is None and parent is not None:
                self._put(replace(old, part_of=parent))
                self._set_map(self.children, (parent, kind, old.sequence), old.omid)
            return level.omid
        key = (parent, kind, level.sequence)
        if parent is not None:
            found = self.children.get(key)
            if found is not None and found in self.records:
                return found
        omid = self._mint("br")
        self._put(BrRecord(omid, kind, sequence=level.sequence, part_of=parent))
        if parent is not None:
            self._set_map(self.children, key, omid)
        return omid

    def _materialize_container(self, container: CuratedEntity, note) -> OMID:
        issue, volume, venue = container_levels(container)
        parent = self._materialize_venue(venue, note) if venue is not None else None
        if volume is not None:
            parent = self._child(parent, VOLUME_TYPE, volume)
        if issue is not None:
            parent = self._child(parent, ISSUE_TYPE, issue)
        return parent

    # -- commit ------------------------------------------------------------
    def next_time(self) -> datetime:
        now = utc(self.clock())
        if self.last_commit is not None and now <= self.last_commit:
            now = self.last_commit + timedelta(seconds=1)
        return now

    def commit(self, description: Optional[str] = None) -> int:
        """Write every changed record to the provenance store at one timestamp.

        Returns the number of snapshots created.
        """
        if not self._dirty:
            return 0
        when = self.next_time()
        made = 0
        for omid in sorted(self._dirty):
            rec = self.records.get(omid)
            quads = record_to_quads(rec) if rec is not None else set()
            if not self.prov.exists(omid):
                if rec is None:
                    continue
                self.prov.record_creation(omid, quads, self.agent, self.source, when, description)
                made += 1
            elif rec is None:
                if self.prov.is_live(omid):
                    self.prov.record_deletion(omid, self.agent, self.source, when, description)
                    made += 1
            elif self.prov.record_modification(omid, quads, self.agent, self.source, when,
                                               description) is not None:
                made += 1
        self._dirty.clear()
        if made:
            self.last_commit = when
        return made

    # -- administrative merge ------------------------------------------------
    def merge_entities(self, survivor: OMID, absorbed: Iterable[OMID],
                       description: Optional[str] = None) -> None:
        """Fold ``absorbed`` br or ra entities into ``survivor`` and commit.

        References to the absorbed entities are redirected to the survivor.
        """
        if self._dirty:
            self.commit()
        absorbed = sorted(set(absorbed))
        if survivor in absorbed:
            raise ValueError(f"{survivor} cannot absorb itself")
        for omid in [survivor, *absorbed]:
            rec = self.records.get(omid)
            if rec is None:
                raise ValueError(f"{omid} is not live")
            if omid.entity_type != survivor.entity_type or survivor.entity_type not in ("br", "ra"):
                raise ValueError(f"cannot merge {omid} into {survivor}")
        notes = []
        note = notes.append
        if survivor.entity_type == "br":
            merged = self.entity(survivor)
            for other in absorbed:
                merged = merge(merged, self.entity(other), note=note)
            # keys move to the survivor; unbind first so attach does not refuse them
            for other in absorbed:
                for key in self._id_keys(self.records[other].ids):
                    self.index.unbind(key, other)
            self._materialize_br(merged, note)
            orphans = set()
            for other in absorbed:
                rec = self.records[other]
                orphans |= set(rec.roles) - set(self.records[survivor].roles)
                if rec.embodiment and rec.embodiment != self.records[survivor].embodiment:
                    orphans.add(rec.embodiment)
        else:
            rec = self.records[survivor]
            rec = RaRecord(survivor, rec.family, rec.given, rec.name, set(rec.ids))
            for other in absorbed:
                o = self.records[other]
                rec.family, rec.given, rec.name = rec.family or o.family, rec.given or o.given, rec.name or o.name
                rec.ids |= o.ids
                for key in self._id_keys(o.ids):
                    self.index.unbind(key, other)
                    self.index.bind(key, survivor)
            self._put_if_changed(rec)
            orphans = set()
        gone = set(absorbed)
        for omid, rec in list(self.records.items()):
            if omid in gone or omid in orphans:
                continue
            if isinstance(rec, BrRecord) and rec.part_of in gone:
                self._put(replace(rec, part_of=survivor))
            elif isinstance(rec, ArRecord) and rec.agent in gone:
                self._put(replace(rec, agent=survivor))
        for child_key, child in list(self.children.items()):
            if child_key[0] in gone:
                del self.children[child_key]
                self.children.setdefault((survivor,) + child_key[1:], child)

        when = self.next_time()
        self._dirty.discard(survivor)
        survivor_quads = record_to_quads(self.records[survivor])
        self.prov.record_merge(survivor, absorbed, self.agent, self.source, when,
                               survivor_quads=survivor_quads, description=description)
        for other in absorbed:
            self.records.pop(other, None)
            self._dirty.discard(other)
        for orphan in orphans:
            if orphan in self.records:
                self.records.pop(orphan)
                self._dirty.add(orphan)
        # remaining dirty entities (referrers, orphans) share the merge timestamp
        for omid in sorted(self._dirty):
            rec = self.records.get(omid)
            if rec is None:
                if self.prov.is_live(omid):
                    self.prov.record_deletion(omid, self.agent, self.source, when, description)
            elif not self.prov.exists(omid):
                self.prov.record_creation(omid, record_to_quads(rec), self.agent, self.source, when)
            else:
                self.prov.record_modification(omid, record_to_quads(rec), self.agent, self.source,
                                              when, description)
        self._dirty.clear()
        self.last_commit = when
        for message in notes:
            logger.info(message)

    def delete_entity(self, omid: OMID, description: Optional[str] = None) -> None:
        """Delete one live entity (no merge); its ids stop resolving."""
        if self._dirty:
            self.commit()
        if omid not in self.records:
            raise ValueError(f"{omid} is not live")
        self.records.pop(omid)
        self._dirty.add(omid)
        self.commit(description)
