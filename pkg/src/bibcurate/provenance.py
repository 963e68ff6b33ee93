"""Quad storage with per-entity snapshot chains and time-traversal.

Every entity (one OMID) has a chain of snapshots. Snapshot ``n`` of
``<entity>`` is the named graph ``<entity>/prov/se/<n>``; it records who made
the change, from which source, when, and an ``oco:hasUpdateQuery`` that turns
the entity's state back into what it was before the change. Only the latest
state of each entity is kept in the data graphs; older states are rebuilt by
replaying those inverse updates backwards.
"""

from __future__ import annotations

import fcntl
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .ocdm import DCTERMS, OCO, PROV, RDF, graph_iri
from .omid import BASE_IRI, ENTITY_TYPES, OMID, ResolutionIndex
from .rdf import IRI, XSD, Literal, apply_update, build_update, parse_nquads, quad_to_nq

logger = logging.getLogger(__name__)

XSD_DATETIME = XSD + "dateTime"


class ProvenanceError(ValueError):
    pass


def utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _time_literal(ts: datetime) -> Literal:
    return Literal(ts.isoformat(), XSD_DATETIME)


def _parse_time(literal: Literal) -> datetime:
    return utc(datetime.fromisoformat(literal.lexical.replace("Z", "+00:00")))


def snapshot_iri(omid: OMID, number: int) -> IRI:
    return IRI(f"{omid.iri}/prov/se/{number}")


@dataclass
class Snapshot:
    subject_entity: OMID
    number: int
    attributed_to: str
    generated_at: datetime
    primary_source: Optional[str] = None
    derived_from: list = field(default_factory=list)
    invalidated_at: Optional[datetime] = None
    description: Optional[str] = None
    update_query: Optional[str] = None

    @property
    def iri(self) -> IRI:
        return snapshot_iri(self.subject_entity, self.number)

    @property
    def is_merge(self) -> bool:
        return len(self.derived_from) >= 2

    def quads(self) -> set:
        s = g = self.iri
        out = {
            (s, RDF.type, PROV.Entity, g),
            (s, PROV.specializationOf, IRI(self.subject_entity.iri), g),
            (s, PROV.wasAttributedTo, IRI(self.attributed_to), g),
            (s, PROV.generatedAtTime, _time_literal(self.generated_at), g),
        }
        if self.primary_source:
            out.add((s, PROV.hadPrimarySource, IRI(self.primary_source), g))
        if self.invalidated_at is not None:
            out.add((s, PROV.invalidatedAtTime, _time_literal(self.invalidated_at), g))
        for prior in self.derived_from:
            out.add((s, PROV.wasDerivedFrom, IRI(prior), g))
        if self.description:
            out.add((s, DCTERMS.description, Literal(self.description), g))
        if self.update_query:
            out.add((s, OCO.hasUpdateQuery, Literal(self.update_query), g))
        return out

    @classmethod
    def from_quads(cls, graph: str, quads: Iterable) -> "Snapshot":
        entity, _, number = graph.rpartition("/prov/se/")
        snap = cls(OMID.parse(entity), int(number), "", datetime.min.replace(tzinfo=timezone.utc))
        for _, p, o, _ in quads:
            if p == PROV.wasAttributedTo:
                snap.attributed_to = str(o)
            elif p == PROV.hadPrimarySource:
                snap.primary_source = str(o)
            elif p == PROV.generatedAtTime:
                snap.generated_at = _parse_time(o)
            elif p == PROV.invalidatedAtTime:
                snap.invalidated_at = _parse_time(o)
            elif p == PROV.wasDerivedFrom:
                snap.derived_from.append(str(o))
            elif p == DCTERMS.description:
                snap.description = o.lexical
            elif p == OCO.hasUpdateQuery:
                snap.update_query = o.lexical
        snap.derived_from.sort()
        return snap


def _entity_of_snapshot(iri: str) -> OMID:
    return OMID.parse(iri.rpartition("/prov/se/")[0])


class QuadStore:
    """Data quads grouped by subject plus provenance quads grouped by graph.

    All mutations are journaled so a caller can append them to a log.
    """

    def __init__(self):
        self.data: dict[str, frozenset] = {}
        self.prov: dict[str, frozenset] = {}
        self.journal: list[tuple[str, tuple]] = []

    def entity_state(self, omid: OMID) -> frozenset:
        return self.data.get(omid.iri, frozenset())

    def set_entity_state(self, omid: OMID, quads: Iterable) -> None:
        key = omid.iri
        new = frozenset(quads)
        for q in new:
            if q[0] != key:
                raise ProvenanceError(f"quad {q} does not describe {omid}")
            if q[3] is not None and str(q[3]).startswith(key + "/prov/"):
                raise ProvenanceError("data quads cannot live in a provenance graph")
        old = self.data.get(key, frozenset())
        self._journal(old, new)
        if new:
            self.data[key] = new
        else:
            self.data.pop(key, None)

    def set_graph(self, graph: str, quads: Iterable) -> None:
        new = frozenset(quads)
        old = self.prov.get(graph, frozenset())
        self._journal(old, new)
        self.prov[graph] = new

    def _journal(self, old: frozenset, new: frozenset) -> None:
        if old is new:
            return
        self.journal.extend(("-", q) for q in old - new)
        self.journal.extend(("+", q) for q in new - old)

    def data_quads(self):
        for quads in self.data.values():
            yield from quads

    def prov_quads(self):
        for quads in self.prov.values():
            yield from quads

    def quads(self):
        yield from self.data_quads()
        yield from self.prov_quads()

    def __len__(self) -> int:
        return sum(len(q) for q in self.data.values()) + sum(len(q) for q in self.prov.values())

    def add_raw(self, quad: tuple) -> None:
        """Insert a quad read back from disk (no journaling)."""
        g = quad[3]
        if g is not None and "/prov/se/" in str(g):
            self.prov[str(g)] = self.prov.get(str(g), frozenset()) | {quad}
        else:
            key = str(quad[0])
            self.data[key] = self.data.get(key, frozenset()) | {quad}

    def remove_raw(self, quad: tuple) -> None:
        g = quad[3]
        table, key = ((self.prov, str(g)) if g is not None and "/prov/se/" in str(g)
                      else (self.data, str(quad[0])))
        remaining = table.get(key, frozenset()) - {quad}
        if remaining:
            table[key] = remaining
        else:
            table.pop(key, None)


class ProvenanceStore:
    """Change-tracked entity store.

    ``index`` (optional) is kept in sync on merges and deletions so ids of
    absorbed entities resolve to the survivor.
    """

    def __init__(self, store: Optional[QuadStore] = None, index: Optional[ResolutionIndex] = None):
        self.store = store if store is not None else QuadStore()
        self.index = index
        self.snapshots: dict[OMID, list[Snapshot]] = {}
        if store is not None:
            self._load_snapshots()

    # -- bookkeeping -------------------------------------------------------
    def _load_snapshots(self) -> None:
        for graph, quads in self.store.prov.items():
            snap = Snapshot.from_quads(graph, quads)
            self.snapshots.setdefault(snap.subject_entity, []).append(snap)
        for chain in self.snapshots.values():
            chain.sort(key=lambda s: s.number)

    def history(self, omid: OMID) -> list[Snapshot]:
        return list(self.snapshots.get(omid, []))

    def is_live(self, omid: OMID) -> bool:
        return omid.iri in self.store.data

    def exists(self, omid: OMID) -> bool:
        return omid in self.snapshots

    def current(self, omid: OMID) -> frozenset:
        return self.store.entity_state(omid)

    def snapshot_count(self) -> int:
        return sum(len(chain) for chain in self.snapshots.values())

    def _write(self, snap: Snapshot) -> None:
        self.store.set_graph(snap.iri, snap.quads())

    def _append(self, omid: OMID, snap_args: dict, time: datetime) -> Snapshot:
        chain = self.snapshots.setdefault(omid, [])
        if chain:
            last = chain[-1]
            if time <= last.generated_at:
                raise ProvenanceError(
                    f"{omid}: snapshot time {time.isoformat()} is not after "
                    f"{last.generated_at.isoformat()}")
            last.invalidated_at = time
            self._write(last)
        snap = Snapshot(omid, len(chain) + 1, generated_at=time, **snap_args)
        if chain and not snap.derived_from:
            snap.derived_from = [str(chain[-1].iri)]
        chain.append(snap)
        self._write(snap)
        return snap

    # -- operations --------------------------------------------------------
    def record_creation(self, omid: OMID, quads: Iterable, agent: str, source: Optional[str],
                        time: datetime, description: Optional[str] = None) -> Snapshot:
        if self.exists(omid):
            raise ProvenanceError(f"{omid} already exists")
        time = utc(time)
        self.store.set_entity_state(omid, quads)
        return self._append(omid, dict(attributed_to=agent, primary_source=source,
                                       description=description), time)

    def record_modification(self, omid: OMID, quads: Iterable, agent: str,
                            source: Optional[str], time: datetime,
                            description: Optional[str] = None) -> Optional[Snapshot]:
        """Replace the entity's quads; returns None (and records nothing) if unchanged."""
        if not self.is_live(omid):
            raise ProvenanceError(f"{omid} is not live")
        time = utc(time)
        old = self.store.entity_state(omid)
        new = frozenset(quads)
        if new == old:
            return None
        query = build_update(new - old, old - new)
        self.store.set_entity_state(omid, new)
        return self._append(omid, dict(attributed_to=agent, primary_source=source,
                                       description=description, update_query=query), time)

    def record_deletion(self, omid: OMID, agent: str, source: Optional[str], time: datetime,
                        description: Optional[str] = None) -> Snapshot:
        if not self.is_live(omid):
            raise ProvenanceError(f"{omid} is not live")
        time = utc(time)
        old = self.store.entity_state(omid)
        self.store.set_entity_state(omid, ())
        snap = self._append(omid, dict(attributed_to=agent, primary_source=source,
                                       description=description or f"The entity '{omid.iri}' has been deleted.",
                                       update_query=build_update((), old)), time)
        if self.index is not None:
            self.index.mark_dead(omid)
        return snap

    def record_merge(self, survivor: OMID, absorbed: Iterable[OMID], agent: str,
                     source: Optional[str], time: datetime, survivor_quads: Optional[Iterable] = None,
                     description: Optional[str] = None) -> Snapshot:
        absorbed = sorted(set(absorbed))
        if not absorbed:
            raise ProvenanceError("merge needs at least one absorbed entity")
        if survivor in absorbed:
            raise ProvenanceError(f"{survivor} cannot absorb itself")
        for omid in [survivor, *absorbed]:
            if not self.is_live(omid):
                raise ProvenanceError(f"{omid} is not live")
            if omid.entity_type != survivor.entity_type:
                raise ProvenanceError(f"cannot merge {omid} into {survivor}")
        time = utc(time)
        derived = [str(self.snapshots[survivor][-1].iri)]
        derived += [str(self.snapshots[a][-1].iri) for a in absorbed]
        old = self.store.entity_state(survivor)
        new = old if survivor_quads is None else frozenset(survivor_quads)
        query = build_update(new - old, old - new) if new != old else None
        self.store.set_entity_state(survivor, new)
        merged_names = ", ".join(f"'{a.iri}'" for a in absorbed)
        snap = self._append(survivor, dict(
            attributed_to=agent, primary_source=source, derived_from=sorted(derived),
            description=description or f"The entity '{survivor.iri}' has been merged with {merged_names}.",
            update_query=query), time)
        for omid in absorbed:
            self.record_deletion(omid, agent, source, time,
                                 description=f"The entity '{omid.iri}' has been merged into '{survivor.iri}'.")
            if self.index is not None:
                self.index.add_merge(omid, survivor)
        return snap

    def reconstruct_at(self, omid: OMID, time: datetime) -> set:
        """Quads of ``omid`` as they stood at ``time``."""
        time = utc(time)
        chain = self.snapshots.get(omid, [])
        if not chain or time < chain[0].generated_at:
            return set()
        state = set(self.store.entity_state(omid))
        for snap in reversed(chain):
            if snap.generated_at <= time:
                break
            state = apply_update(state, snap.update_query)
        return state

    def last_state_before_deletion(self, omid: OMID) -> set:
        chain = self.snapshots.get(omid, [])
        if not chain:
            return set()
        return apply_update(set(self.store.entity_state(omid)), chain[-1].update_query)

    def check_invariants(self) -> None:
        """Raise ProvenanceError if any chain breaks the snapshot rules."""
        for omid, chain in self.snapshots.items():
            for i, snap in enumerate(chain):
                if snap.number != i + 1:
                    raise ProvenanceError(f"{omid}: snapshot numbering gap at {snap.number}")
                if i == 0 and (snap.derived_from or snap.update_query):
                    raise ProvenanceError(f"{omid}: creation snapshot must not derive or carry a delta")
                if i > 0 and str(chain[i - 1].iri) not in snap.derived_from:
                    raise ProvenanceError(f"{omid}: snapshot {snap.number} not derived from its predecessor")
                if i + 1 < len(chain):
                    nxt = chain[i + 1]
                    if snap.invalidated_at != nxt.generated_at:
                        raise ProvenanceError(f"{omid}: snapshot {snap.number} invalidation mismatch")
                    if not nxt.generated_at > snap.generated_at:
                        raise ProvenanceError(f"{omid}: generation times not increasing")
                elif snap.invalidated_at is not None:
                    raise ProvenanceError(f"{omid}: last snapshot must not be invalidated")

    def build_index(self) -> ResolutionIndex:
        """Recompute the merge chain and dead set from provenance alone."""
        index = ResolutionIndex()
        for omid, chain in self.snapshots.items():
            index.register(omid)
            if not self.is_live(omid):
                index.mark_dead(omid)
            for snap in chain:
                if snap.is_merge:
                    for prior in snap.derived_from:
                        other = _entity_of_snapshot(prior)
                        if other != omid:
                            index.merge_chain[other] = omid
        return index


# ---------------------------------------------------------------------------
# on-disk layout

class StoreFiles:
    """Directory layout::

        data/<kind>.nq   prov/<kind>.nq   base N-Quads, rewritten by compact()
        wal.log          '+ <quad>' / '- <quad>' lines appended per commit
        index/           resolution index CSVs
        counters/        OMID counters
        existence.csv    registry answers cache
    """

    def __init__(self, root: os.PathLike):
        self.root = Path(root)

    @property
    def wal(self) -> Path:
        return self.root / "wal.log"

    @property
    def index_dir(self) -> Path:
        return self.root / "index"

    @property
    def counters_dir(self) -> Path:
        return self.root / "counters"

    @property
    def existence_cache(self) -> Path:
        return self.root / "existence.csv"

    def init(self) -> None:
        for sub in ("data", "prov", "index", "counters"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    @contextmanager
    def lock(self):
        self.init()
        with open(self.root / ".lock", "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def load(self) -> QuadStore:
        store = QuadStore()
        for family in ("data", "prov"):
            directory = self.root / family
            if not directory.exists():
                continue
            for path in sorted(directory.glob("*.nq")):
                for quad in parse_nquads(path.read_bytes()):
                    store.add_raw(quad)
        if self.wal.exists():
            entries = [line for line in self.wal.read_text(encoding="utf-8").split("\n") if line]
            quads = parse_nquads("\n".join(line[2:] for line in entries))
            if len(quads) != len(entries):
                raise ValueError(f"{self.wal}: corrupt log entry")
            for line, quad in zip(entries, quads):
                if line[0] == "+":
                    store.add_raw(quad)
                else:
                    store.remove_raw(quad)
        return store

    def append_journal(self, store: QuadStore) -> int:
        if not store.journal:
            return 0
        self.init()
        lines = [f"{op} {quad_to_nq(q)}\n" for op, q in store.journal]
        with open(self.wal, "a", encoding="utf-8") as fh:
            fh.writelines(lines)
            fh.flush()
            os.fsync(fh.fileno())
        count = len(store.journal)
        store.journal.clear()
        return count

    def compact(self, store: QuadStore) -> None:
        """Rewrite the base files from ``store`` and empty the log."""
        from .rdf import serialize_nquads

        self.init()
        families = {"data": {}, "prov": {}}
        for quad in store.data_quads():
            kind = OMID.parse(str(quad[0])).entity_type
            families["data"].setdefault(kind, []).append(quad)
        for quad in store.prov_quads():
            kind = _entity_of_snapshot(str(quad[3])).entity_type
            families["prov"].setdefault(kind, []).append(quad)
        for family, groups in families.items():
            for kind in ENTITY_TYPES:
                path = self.root / family / f"{kind}.nq"
                tmp = path.with_name(path.name + ".tmp")
                tmp.write_bytes(serialize_nquads(groups.get(kind, [])))
                os.replace(tmp, path)
        with open(self.wal, "w", encoding="utf-8"):
            pass
        store.journal.clear()


def dump_nquads(store: QuadStore) -> bytes:
    from .rdf import serialize_nquads

    return serialize_nquads(store.quads())


def load_nquads(data) -> QuadStore:
    store = QuadStore()
    for quad in parse_nquads(data):
        store.add_raw(quad)
    return store


__all__ = [
    "BASE_IRI", "ProvenanceError", "ProvenanceStore", "QuadStore", "Snapshot", "StoreFiles",
    "dump_nquads", "graph_iri", "load_nquads", "snapshot_iri", "utc",
]
