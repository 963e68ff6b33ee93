"""Internal identifiers: supplier-prefix grammar, durable counters and the id index."""

from __future__ import annotations

import csv
import os
import re
import threading
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

ENTITY_TYPES = ("br", "ra", "ar", "re", "id")
DEFAULT_PREFIX = "060"
BASE_IRI = "https://w3id.org/oc/meta/"

_PREFIX = re.compile(r"06[1-9]*0")
_OMID = re.compile(r"(br|ra|ar|re|id)/(06[1-9]*0)([1-9]\d*)")


def validate_prefix(text: str) -> bool:
    return bool(_PREFIX.fullmatch(text))


@dataclass(frozen=True, order=True)
class OMID:
    entity_type: str
    supplier_prefix: str
    sequence: int

    def __post_init__(self):
        if self.entity_type not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {self.entity_type!r}")
        if not validate_prefix(self.supplier_prefix):
            raise ValueError(f"invalid supplier prefix {self.supplier_prefix!r}")
        if self.sequence < 1:
            raise ValueError("sequence must be positive")

    def __str__(self) -> str:
        return f"{self.entity_type}/{self.supplier_prefix}{self.sequence}"

    @property
    def iri(self) -> str:
        return BASE_IRI + str(self)

    @classmethod
    def parse(cls, text: str) -> "OMID":
        """Accepts ``br/0601``, ``omid:br/0601`` or the full w3id IRI."""
        return _parse_omid(text)

    @classmethod
    def _parse(cls, text: str) -> "OMID":
        text = text.strip()
        if text.startswith(BASE_IRI):
            text = text[len(BASE_IRI):]
        if text.lower().startswith("omid:"):
            text = text[5:]
        m = _OMID.fullmatch(text)
        if not m:
            raise ValueError(f"not an OMID: {text!r}")
        return cls(m.group(1), m.group(2), int(m.group(3)))


@lru_cache(maxsize=1 << 18)
def _parse_omid(text: str) -> OMID:
    return OMID._parse(text)


class CounterPersistenceError(RuntimeError):
    pass


class CounterStore:
    """One decimal counter file per (prefix, type), replaced atomically.

    With ``directory=None`` the counters live in memory only.
    """

    def __init__(self, directory: Optional[os.PathLike] = None, fsync: bool = True):
        self.directory = Path(directory) if directory is not None else None
        self.fsync = fsync
        self._memory: dict[tuple[str, str], int] = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, prefix: str, entity_type: str) -> Path:
        return self.directory / f"{prefix}_{entity_type}.txt"

    def read(self, prefix: str, entity_type: str) -> int:
        if self.directory is None:
            return self._memory.get((prefix, entity_type), 0)
        path = self._path(prefix, entity_type)
        if not path.exists():
            return 0
        return int(path.read_text(encoding="ascii").strip() or 0)

    def write(self, prefix: str, entity_type: str, value: int) -> None:
        if self.directory is None:
            self._memory[(prefix, entity_type)] = value
            return
        path = self._path(prefix, entity_type)
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "w", encoding="ascii") as fh:
                fh.write(f"{value}\n")
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            raise CounterPersistenceError(f"cannot persist counter {path}: {exc}") from exc


class Minter:
    """Hands out sequential OMIDs per entity type.

    Numbers are reserved in blocks of ``block_size``: the counter file holds
    the high-water mark and is written before any number of the block is
    returned, so a crash can leave a gap but never a repeat.
    """

    def __init__(self, counters: Optional[CounterStore] = None,
                 prefix: str = DEFAULT_PREFIX, block_size: int = 1):
        if not validate_prefix(prefix):
            raise ValueError(f"invalid supplier prefix {prefix!r}")
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        self.counters = counters if counters is not None else CounterStore()
        self.prefix = prefix
        self.block_size = block_size
        self._next: dict[str, int] = {}
        self._limit: dict[str, int] = {}
        self._lock = threading.Lock()

    def mint(self, entity_type: str) -> OMID:
        with self._lock:
            if entity_type not in self._next:
                start = self.counters.read(self.prefix, entity_type)
                self._next[entity_type] = start + 1
                self._limit[entity_type] = start
            seq = self._next[entity_type]
            if seq > self._limit[entity_type]:
                limit = seq + self.block_size - 1
                self.counters.write(self.prefix, entity_type, limit)
                self._limit[entity_type] = limit
            self._next[entity_type] = seq + 1
            return OMID(entity_type, self.prefix, seq)

    def observe(self, omid: OMID) -> None:
        """Make sure future mints stay above an OMID found in loaded data."""
        if omid.supplier_prefix != self.prefix:
            return
        with self._lock:
            current = self.counters.read(self.prefix, omid.entity_type)
            if omid.sequence > current:
                self.counters.write(self.prefix, omid.entity_type, omid.sequence)
                self._next.pop(omid.entity_type, None)
                self._limit.pop(omid.entity_type, None)


class MergeCycleError(ValueError):
    pass


class ResolutionIndex:
    """External id -> OMID lookups with merge-chain chasing.

    ``bindings`` keeps every id ever attached, including ids of entities that
    were later deleted; ``merge_chain`` redirects absorbed OMIDs to the
    entity that absorbed them.
    """

    def __init__(self):
        self.bindings: dict[tuple[str, str], OMID] = {}
        self.merge_chain: dict[OMID, OMID] = {}
        self.dead: set[OMID] = set()
        # every OMID ever registered, live or not
        self.entities: set[OMID] = set()
        # sorted id keys of a conflicting input -> the entity minted for it
        self.conflicts: dict[tuple[str, ...], OMID] = {}
        self._owned: dict[OMID, set[str]] = {}

    # -- mutation ----------------------------------------------------------
    def bind(self, key: str, omid: OMID) -> None:
        slot = (omid.entity_type, key)
        old = self.bindings.get(slot)
        if old is not None and old != omid:
            self._owned.get(old, set()).discard(key)
        self.bindings[slot] = omid
        self._owned.setdefault(omid, set()).add(key)

    def unbind(self, key: str, omid: OMID) -> None:
        slot = (omid.entity_type, key)
        if self.bindings.get(slot) == omid:
            del self.bindings[slot]
        self._owned.get(omid, set()).discard(key)

    def register(self, omid: OMID) -> None:
        self.entities.add(omid)

    def knows(self, omid: OMID) -> bool:
        return omid in self.entities or omid in self.merge_chain or omid in self.dead

    def mark_dead(self, omid: OMID) -> None:
        self.dead.add(omid)

    def revive(self, omid: OMID) -> None:
        self.dead.discard(omid)

    def add_merge(self, old: OMID, new: OMID) -> None:
        if old == new:
            raise MergeCycleError(f"cannot merge {old} into itself")
        if old.entity_type != new.entity_type:
            raise ValueError(f"cannot merge {old} into an entity of another type ({new})")
        if self.chase(new) == old:
            raise MergeCycleError(f"merging {old} into {new} would close a cycle")
        self.merge_chain[old] = new
        self.dead.add(old)

    # -- queries -----------------------------------------------------------
    def chase(self, omid: OMID) -> OMID:
        seen = set()
        while omid in self.merge_chain:
            if omid in seen:
                raise MergeCycleError(f"cycle in merge chain at {omid}")
            seen.add(omid)
            omid = self.merge_chain[omid]
        return omid

    def is_live(self, omid: OMID) -> bool:
        return omid not in self.dead

    def lookup(self, entity_type: str, key: str) -> Optional[OMID]:
        """The live OMID currently answering for ``key``, if any."""
        omid = self.bindings.get((entity_type, key))
        if omid is None:
            return None
        omid = self.chase(omid)
        return omid if self.is_live(omid) else None

    def resolve(self, ids: Iterable, entity_type: str = "br") -> set[OMID]:
        out = set()
        for ext in ids:
            hit = self.lookup(entity_type, str(ext))
            if hit is not None:
                out.add(hit)
        return out

    def deleted_owner(self, entity_type: str, key: str) -> Optional[OMID]:
        """OMID of a deleted (not merged) entity that used to hold ``key``."""
        omid = self.bindings.get((entity_type, key))
        if omid is None:
            return None
        omid = self.chase(omid)
        return omid if not self.is_live(omid) else None

    def keys_of(self, omid: OMID) -> set[str]:
        return set(self._owned.get(omid, ()))

    # -- persistence -------------------------------------------------------
    def save(self, directory: os.PathLike) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _write_csv(directory / "ids.csv", ["id", "omid"],
                   sorted((key, str(omid)) for (_, key), omid in self.bindings.items()))
        _write_csv(directory / "merge_chain.csv", ["old_omid", "new_omid"],
                   sorted((str(a), str(b)) for a, b in self.merge_chain.items()))
        _write_csv(directory / "deleted.csv", ["omid"], sorted([str(o)] for o in self.dead))
        _write_csv(directory / "entities.csv", ["omid"], sorted([str(o)] for o in self.entities))
        _write_csv(directory / "conflicts.csv", ["ids", "omid"],
                   sorted((" ".join(keys), str(o)) for keys, o in self.conflicts.items()))

    @classmethod
    def load(cls, directory: os.PathLike) -> "ResolutionIndex":
        directory = Path(directory)
        index = cls()
        for key, omid in _read_csv(directory / "ids.csv"):
            index.bind(key, OMID.parse(omid))
        for old, new in _read_csv(directory / "merge_chain.csv"):
            index.merge_chain[OMID.parse(old)] = OMID.parse(new)
        for (omid,) in _read_csv(directory / "deleted.csv"):
            index.dead.add(OMID.parse(omid))
        for (omid,) in _read_csv(directory / "entities.csv"):
            index.entities.add(OMID.parse(omid))
        for keys, omid in _read_csv(directory / "conflicts.csv"):
            index.conflicts[tuple(keys.split(" "))] = OMID.parse(omid)
        return index

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResolutionIndex):
            return NotImplemented
        return (self.bindings == other.bindings and self.merge_chain == other.merge_chain
                and self.dead == other.dead and self.entities == other.entities)


def _write_csv(path: Path, header, rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _read_csv(path: Path):
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]
