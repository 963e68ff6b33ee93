"""Operator surface: configuration, store workspace, statistics, lookups and HTTP."""

from __future__ import annotations

import json
import logging
import os
import threading
from collections import Counter
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Iterable, Optional
from urllib.parse import unquote, urlsplit

from .curator import DEFAULT_AGENT, Curator, RowNormalizer, system_clock
from .ids import ExistenceCache, HttpResolver, OfflineResolver, parse_token
from .model import ISSUE_TYPE, VOLUME_TYPE
from .normalize import DEFAULT_KEYWORDS, KeywordTable
from .ocdm import ArRecord, BrRecord, RaRecord
from .omid import DEFAULT_PREFIX, OMID, CounterStore, Minter, ResolutionIndex
from .provenance import ProvenanceStore, StoreFiles
from .table import entity_to_row

logger = logging.getLogger(__name__)

CONFIG_ENV = "BIBCURATE_CONFIG"
MINT_BLOCK = 1000


# ---------------------------------------------------------------------------
# configuration

@dataclass
class Config:
    supplier_prefix: str = DEFAULT_PREFIX
    curator_agent: str = DEFAULT_AGENT
    primary_source: Optional[str] = None
    resolver_urls: dict = field(default_factory=dict)
    offline: bool = True
    keywords_file: Optional[str] = None
    mint_block: int = MINT_BLOCK


_TRUE = {"1", "true", "yes", "on"}


def load_config(path: Optional[os.PathLike] = None) -> Config:
    """Read ``key = value`` lines; ``resolver.<scheme>`` keys set registry URLs.

    Without ``path`` the ``BIBCURATE_CONFIG`` variable is consulted; with
    neither, defaults apply.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    config = Config()
    if path is None:
        return config
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{number}: expected key=value")
        key, value = key.strip().lower(), value.strip()
        if key == "supplier_prefix":
            config.supplier_prefix = value
        elif key == "curator_agent":
            config.curator_agent = value
        elif key == "primary_source":
            config.primary_source = value or None
        elif key.startswith("resolver."):
            config.resolver_urls[key.split(".", 1)[1]] = value
        elif key == "offline":
            config.offline = value.lower() in _TRUE
        elif key == "keywords_file":
            config.keywords_file = value or None
        elif key == "mint_block":
            config.mint_block = int(value)
        else:
            raise ValueError(f"{path}:{number}: unknown key {key!r}")
    return config


# ---------------------------------------------------------------------------
# an opened store directory

class Workspace:
    """A store directory loaded into a ready-to-use ``Curator``."""

    def __init__(self, root: os.PathLike, config: Optional[Config] = None,
                 clock: Callable = system_clock):
        self.config = config or Config()
        self.files = StoreFiles(root)
        self.files.init()
        self.prov = ProvenanceStore(self.files.load())
        counters = CounterStore(self.files.counters_dir)
        minter = Minter(counters, self.config.supplier_prefix, self.config.mint_block)
        self.cache = ExistenceCache(self.files.existence_cache)
        client = OfflineResolver() if self.config.offline else HttpResolver(self.config.resolver_urls)
        keywords = (KeywordTable.from_file(self.config.keywords_file)
                    if self.config.keywords_file else DEFAULT_KEYWORDS)
        self.curator = Curator(self.prov, minter, agent=self.config.curator_agent,
                               source=self.config.primary_source, clock=clock,
                               normalizer=RowNormalizer(client, self.cache, keywords))
        saved = self.files.index_dir / "conflicts.csv"
        if saved.exists():
            self.curator.index.conflicts.update(ResolutionIndex.load(self.files.index_dir).conflicts)

    @property
    def index(self) -> ResolutionIndex:
        return self.curator.index

    def save(self) -> None:
        self.files.append_journal(self.prov.store)
        self.index.save(self.files.index_dir)
        self.cache.save()

    def compact(self) -> None:
        self.files.compact(self.prov.store)
        self.index.save(self.files.index_dir)


# ---------------------------------------------------------------------------
# statistics

@dataclass
class StatsReport:
    bibliographic_entities: int = 0
    by_type: dict = field(default_factory=dict)
    by_year: dict = field(default_factory=dict)
    author_roles: int = 0
    editor_roles: int = 0
    publisher_roles: int = 0
    publishers: int = 0
    venues: int = 0
    top_publishers_by_venues: list = field(default_factory=list)
    top_publishers_by_publications: list = field(default_factory=list)
    top_venues_by_publications: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        lines = [
            f"bibliographic entities: {self.bibliographic_entities}",
            f"author roles: {self.author_roles}",
            f"editor roles: {self.editor_roles}",
            f"publishers: {self.publishers}",
            f"venues: {self.venues}",
            "by type:",
        ]
        lines += [f"  {k}: {v}" for k, v in self.by_type.items()]
        lines.append("by year:")
        lines += [f"  {k}: {v}" for k, v in self.by_year.items()]
        for title, rows in (("top publishers by venues", self.top_publishers_by_venues),
                            ("top publishers by publications", self.top_publishers_by_publications),
                            ("top venues by publications", self.top_venues_by_publications)):
            lines.append(f"{title}:")
            lines += [f"  {name}: {count}" for name, count in rows]
        return "\n".join(lines) + "\n"


def _root(records: dict, omid: OMID) -> Optional[BrRecord]:
    seen = set()
    node = records.get(omid)
    while isinstance(node, BrRecord) and node.part_of is not None and node.part_of not in seen:
        seen.add(node.omid)
        parent = records.get(node.part_of)
        if not isinstance(parent, BrRecord):
            break
        node = parent
    return node


def _top(counter: Counter, n: int) -> list:
    return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def compute_stats(records: dict, top: int = 10) -> StatsReport:
    """Counts over the live records.

    Authors and editors are counted as roles. Publishers are distinct agents
    holding a publisher role. A venue is the outermost container of some
    resource other than a volume or issue; venues with identifiers count
    once per OMID, venues without count once per case-folded title.
    """
    report = StatsReport()
    brs = [r for r in records.values() if isinstance(r, BrRecord)]
    report.bibliographic_entities = len(brs)
    report.by_type = dict(sorted(Counter(r.type or "unspecified" for r in brs).items()))
    report.by_year = dict(sorted(Counter(r.date.year for r in brs if r.date is not None).items()))

    roles = [r for r in records.values() if isinstance(r, ArRecord)]
    report.author_roles = sum(1 for r in roles if r.role == "author")
    report.editor_roles = sum(1 for r in roles if r.role == "editor")
    report.publisher_roles = sum(1 for r in roles if r.role == "publisher")
    publisher_agents = {r.agent for r in roles if r.role == "publisher"}
    report.publishers = len(publisher_agents)

    def venue_key(venue: BrRecord):
        if venue.ids or not venue.title:
            return str(venue.omid), venue.title or str(venue.omid)
        return "title:" + venue.title.casefold(), venue.title

    venue_names: dict = {}
    venue_pubs: Counter = Counter()
    pub_venues: dict = {}
    pub_count: Counter = Counter()
    role_by_omid = {r.omid: r for r in roles}
    for br in brs:
        if br.type in (VOLUME_TYPE, ISSUE_TYPE) or br.part_of is None:
            continue
        root = _root(records, br.omid)
        if root is None or root.omid == br.omid or root.type in (VOLUME_TYPE, ISSUE_TYPE):
            continue
        key, name = venue_key(root)
        venue_names.setdefault(key, name)
        venue_pubs[key] += 1
        for ar_omid in br.roles:
            ar = role_by_omid.get(ar_omid)
            if ar is not None and ar.role == "publisher":
                pub_venues.setdefault(ar.agent, set()).add(key)
    for br in brs:
        for ar_omid in br.roles:
            ar = role_by_omid.get(ar_omid)
            if ar is not None and ar.role == "publisher":
                pub_count[ar.agent] += 1
    report.venues = len(venue_names)

    def agent_name(omid: OMID) -> str:
        rec = records.get(omid)
        if isinstance(rec, RaRecord):
            return rec.name or ", ".join(p for p in (rec.family, rec.given) if p) or str(omid)
        return str(omid)

    report.top_publishers_by_venues = _top(
        Counter({f"{agent_name(a)} [{a}]": len(v) for a, v in pub_venues.items()}), top)
    report.top_publishers_by_publications = _top(
        Counter({f"{agent_name(a)} [{a}]": c for a, c in pub_count.items()}), top)
    report.top_venues_by_publications = _top(
        Counter({f"{venue_names[k]} [{k}]" if not k.startswith("title:") else venue_names[k]: c
                 for k, c in venue_pubs.items()}), top)
    return report


# ---------------------------------------------------------------------------
# lookups and field queries

class QueryError(ValueError):
    """A malformed request; surfaces as HTTP 400."""


FIELDS = ("title", "author", "editor", "publisher", "id", "venue", "volume", "issue")


@dataclass(frozen=True)
class FieldQuery:
    """Disjunction of conjunctions of ``(field, value)`` terms."""

    disjuncts: tuple


def parse_field_query(text: str) -> FieldQuery:
    """``&`` binds tighter than ``||``; values are percent-decoded after splitting."""
    if text is None or not text.strip():
        raise QueryError("empty query")
    disjuncts = []
    for chunk in text.split("||"):
        terms = []
        for part in chunk.split("&"):
            name, sep, value = part.partition("=")
            name = unquote(name).strip().lower()
            value = unquote(value).strip()
            if not sep or not name:
                raise QueryError(f"term {part!r} is not field=value")
            if name not in FIELDS:
                raise QueryError(f"unknown field {name!r}; use one of {', '.join(FIELDS)}")
            if not value:
                raise QueryError(f"empty value for {name!r}")
            terms.append((name, value))
        names = {n for n, _ in terms}
        if names & {"volume", "issue"} and "venue" not in names:
            raise QueryError("volume and issue can only be searched together with a venue")
        disjuncts.append(tuple(terms))
    return FieldQuery(tuple(disjuncts))


def _match(row: dict, terms) -> bool:
    return all(value.casefold() in row.get(name, "").casefold() for name, value in terms)


class LookupService:
    """Read-only queries over a curator's records.

    Rows are rendered lazily and cached; the service never writes.
    """

    def __init__(self, curator: Curator):
        self.curator = curator
        self._rows: dict[OMID, dict] = {}
        self._lock = threading.Lock()

    def row(self, omid: OMID) -> dict:
        with self._lock:
            hit = self._rows.get(omid)
        if hit is None:
            hit = entity_to_row(self.curator.entity(omid))
            with self._lock:
                self._rows[omid] = hit
        return hit

    def resolve_token(self, token: str) -> Optional[OMID]:
        try:
            ext = parse_token(token.strip())
        except ValueError as exc:
            raise QueryError(str(exc)) from exc
        if not ext.syntax_valid:
            raise QueryError(f"malformed {ext.scheme} identifier {ext.value!r}")
        index = self.curator.index
        if ext.scheme == "omid":
            omid = OMID.parse(ext.value)
            if omid.entity_type != "br":
                raise QueryError(f"{omid} is not a bibliographic resource")
            omid = index.chase(omid)
            return omid if isinstance(self.curator.records.get(omid), BrRecord) else None
        return index.lookup("br", str(ext))

    def lookup(self, tokens: Iterable[str]) -> list[dict]:
        seen, out = set(), []
        for token in tokens:
            if not token.strip():
                continue
            omid = self.resolve_token(token)
            if omid is not None and omid not in seen:
                seen.add(omid)
                out.append(self.row(omid))
        return out

    def publications(self) -> list[OMID]:
        """Every br that is not a container of another br."""
        records = self.curator.records
        containers = {r.part_of for r in records.values() if isinstance(r, BrRecord) and r.part_of}
        return sorted(o for o, r in records.items() if isinstance(r, BrRecord) and o not in containers)

    def search(self, query) -> list[dict]:
        if isinstance(query, str):
            query = parse_field_query(query)
        out, seen = [], set()
        for omid in self.publications():
            row = self.row(omid)
            if any(_match(row, terms) for terms in query.disjuncts) and omid not in seen:
                seen.add(omid)
                out.append(row)
        return out


def eval_field_query(query, curator: Curator) -> list[dict]:
    return LookupService(curator).search(query)


# ---------------------------------------------------------------------------
# HTTP

API_PREFIX = "/api/v1/"


def _make_handler(service: LookupService):
    class Handler(BaseHTTPRequestHandler):
        server_version = "bibcurate"

        def _send(self, status: int, payload) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):  # noqa: N802 - http.server naming
            parts = urlsplit(self.path)
            try:
                if parts.path.startswith(API_PREFIX + "metadata/"):
                    raw = parts.path[len(API_PREFIX + "metadata/"):]
                    self._send(200, service.lookup(unquote(raw).split(",")))
                elif parts.path == API_PREFIX + "search":
                    raw = parts.query
                    if not raw.startswith("q="):
                        raise QueryError("missing q parameter")
                    self._send(200, service.search(raw[2:]))
                else:
                    self._send(404, {"error": f"no route for {parts.path}"})
            except QueryError as exc:
                self._send(400, {"error": str(exc)})

        def log_message(self, fmt, *args):
            logger.info("%s %s", self.address_string(), fmt % args)

    return Handler


def make_server(service: LookupService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _make_handler(service))
