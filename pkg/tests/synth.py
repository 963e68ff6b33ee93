"""Synthetic eleven-column rows with counts known by construction.

The generator decides the "true" set of resources first and only then
renders rows (some of them partial duplicates), so the expected statistics
come from its own bookkeeping rather than from the curation code.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from bibcurate.table import InputRecord

from oracles import isbn13_check_digit, issn_check_digit, orcid_check_digit

ARTICLE_TYPES = ("journal article", "book chapter", "proceedings article", "report")
VENUE_TYPE_OF = {"book chapter": "book", "proceedings article": "proceedings"}
WORDS = ("Graph", "Citation", "Metadata", "Ontology", "Archive", "Network", "Signal", "Protein",
         "Climate", "Library", "Semantic", "Index", "Model", "Survey", "Learning", "Repository")


def make_issn(rng: random.Random) -> str:
    body = "".join(str(rng.randrange(10)) for _ in range(7))
    return f"{body[:4]}-{body[4:]}{issn_check_digit(body)}"


def make_orcid(rng: random.Random) -> str:
    body = "0000000" + "".join(str(rng.randrange(10)) for _ in range(8))
    full = body + orcid_check_digit(body)
    return "-".join(full[i:i + 4] for i in range(0, 16, 4))


def make_isbn(rng: random.Random) -> str:
    body = "978" + "".join(str(rng.randrange(10)) for _ in range(9))
    return body + isbn13_check_digit(body)


@dataclass
class Person:
    family: str
    given: str
    orcid: str = ""

    def cell(self) -> str:
        text = f"{self.family}, {self.given}"
        return f"{text} [orcid:{self.orcid}]" if self.orcid else text


@dataclass
class Article:
    ids: list
    title: str
    type: str
    date: str
    authors: list
    editors: list = field(default_factory=list)
    venue: str = ""
    volume: str = ""
    issue: str = ""
    page: str = ""
    publisher: str = ""


@dataclass
class Expected:
    bibliographic_entities: int
    by_type: dict
    by_year: dict
    author_roles: int
    editor_roles: int
    publishers: int
    venues: int


def generate(n_rows: int, seed: int = 0, duplicate_rate: float = 0.15):
    """Return ``(rows, expected, articles)`` for ``n_rows`` rows."""
    rng = random.Random(seed)
    n_articles = max(1, round(n_rows / (1 + duplicate_rate)))
    n_dupes = n_rows - n_articles

    journals = []
    seen_issn = set()
    while len(journals) < max(3, n_articles // 40):
        issn = make_issn(rng)
        if issn not in seen_issn:
            seen_issn.add(issn)
            journals.append((f"Journal Of {rng.choice(WORDS)} Studies {len(journals) + 1}", issn))
    idless_venues = [f"Workshop On {rng.choice(WORDS)} {k}" for k in range(max(3, n_articles // 60))]
    people = []
    orcids = set()
    while len(people) < max(5, n_articles // 5):
        orcid = make_orcid(rng)
        if orcid not in orcids:
            orcids.add(orcid)
            people.append(Person(f"Family{len(people)}", f"Given{len(people)}", orcid))
    publishers = [(f"Publisher {k} Ltd", str(1000 + k)) for k in range(max(3, n_articles // 80))]

    articles = []
    used_issn, volumes, issues = set(), set(), set()
    used_idless_titles, idless_venue_entities = set(), 0
    used_pub_ids, idless_publishers = set(), 0
    by_type, by_year = Counter(), Counter()
    author_roles = editor_roles = 0
    for i in range(n_articles):
        kind = rng.choice(ARTICLE_TYPES)
        ids = [f"doi:10.5555/synth.{seed}.{i}"]
        if rng.random() < 0.3:
            ids.append(f"pmid:{900000 + i}")
        if rng.random() < 0.1:
            ids = ids[1:] or ids
        year = rng.randrange(1990, 2024)
        date = str(year)
        if rng.random() < 0.5:
            date += f"-{rng.randrange(1, 13):02d}"
            if rng.random() < 0.5:
                date += f"-{rng.randrange(1, 29):02d}"
        n_auth = rng.randrange(1, 5)
        authors = []
        for j in range(n_auth):
            if rng.random() < 0.5:
                p = rng.choice(people)
                if any(a.orcid == p.orcid for a in authors):
                    p = Person(f"Solo{i}x{j}", f"Writer{j}")
            else:
                p = Person(f"Solo{i}x{j}", f"Writer{j}")
            authors.append(p)
        art = Article(ids, f"{rng.choice(WORDS)} {rng.choice(WORDS)} Study {i}", kind, date, authors)
        if kind == "journal article":
            title, issn = rng.choice(journals)
            art.venue = f"{title} [issn:{issn}]"
            used_issn.add(issn)
            if rng.random() < 0.8:
                art.volume = str(rng.randrange(1, 30))
                volumes.add((issn, art.volume))
                if rng.random() < 0.7:
                    art.issue = str(rng.randrange(1, 5))
                    issues.add((issn, art.volume, art.issue))
        elif kind in VENUE_TYPE_OF:
            title = rng.choice(idless_venues)
            art.venue = title
            used_idless_titles.add(title.casefold())
            idless_venue_entities += 1
            by_type[VENUE_TYPE_OF[kind]] += 1
            if kind == "book chapter" and rng.random() < 0.5:
                art.editors = [Person(f"Editor{i}x{j}", f"Ed{j}") for j in range(rng.randrange(1, 3))]
        if rng.random() < 0.7:
            start = rng.randrange(1, 900)
            art.page = f"{start}-{start + rng.randrange(1, 40)}"
        if rng.random() < 0.6:
            name, pid = rng.choice(publishers)
            art.publisher = f"{name} [crossref:{pid}]"
            used_pub_ids.add(pid)
        elif rng.random() < 0.5:
            art.publisher = f"Independent Press {i}"
            idless_publishers += 1
        by_type[kind] += 1
        by_year[year] += 1
        author_roles += len(art.authors)
        editor_roles += len(art.editors)
        articles.append(art)

    by_type["journal"] += len(used_issn)
    by_type["journal volume"] += len(volumes)
    by_type["journal issue"] += len(issues)
    expected = Expected(
        bibliographic_entities=n_articles + len(used_issn) + len(volumes) + len(issues) + idless_venue_entities,
        by_type=dict(sorted((k, v) for k, v in by_type.items() if v)),
        by_year=dict(sorted(by_year.items())),
        author_roles=author_roles,
        editor_roles=editor_roles,
        publishers=len(used_pub_ids) + idless_publishers,
        venues=len(used_issn) + len(used_idless_titles),
    )

    rows = [(k, full_row(a)) for k, a in enumerate(articles)]
    for _ in range(n_dupes):
        k = rng.randrange(n_articles)
        rows.append((k, partial_row(articles[k], rng)))
    rng.shuffle(rows)
    return [r for _, r in rows], expected, articles


def _people(persons) -> str:
    return "; ".join(p.cell() for p in persons)


def full_row(a: Article) -> InputRecord:
    return InputRecord(" ".join(a.ids), a.title, _people(a.authors), _people(a.editors), a.date,
                       a.venue, a.volume, a.issue, a.page, a.type, a.publisher)


def partial_row(a: Article, rng: random.Random) -> InputRecord:
    """Same resource, some fields blank, authors reordered: never contradicts ``a``."""
    keep = lambda value: value if rng.random() < 0.6 else ""  # noqa: E731
    authors = list(a.authors)
    rng.shuffle(authors)
    authors = authors[:rng.randrange(0, len(authors) + 1)]
    with_container = rng.random() < 0.5
    return InputRecord(
        rng.choice(a.ids), keep(a.title), _people(authors), "", keep(a.date),
        a.venue if with_container else "", a.volume if with_container else "",
        a.issue if with_container else "", keep(a.page), keep(a.type), "",
    )


NOISY_VOLUMES = ("Vol. 5", ".38", "19/", "38â39", "Tome 1", "Volume 2", "12")
NOISY_ISSUES = ("Issue 3", "Special Issue 2", "3???4", "Özel Sayı 5", "7", "")
NOISY_DATES = ("2020-02-30", "2020-27-12", "2012-07-25", "10000", "1999", "")
NOISY_PAGES = ("1905–1908", "12", "5−6", "")


def noisy_rows(n_rows: int, seed: int = 0) -> list[InputRecord]:
    """Rows with messy cells; each still carries at least one external id."""
    rng = random.Random(seed)
    rows = []
    for i in range(n_rows):
        ids = [f"doi:10.7777/noisy.{seed}.{rng.randrange(n_rows)}"]
        if rng.random() < 0.3:
            ids.append(f"pmid:{rng.randrange(1, n_rows * 2)}")
        if rng.random() < 0.1:
            ids = [f"isbn:{make_isbn(rng)}"]
        authors = "; ".join(
            f"{rng.choice(WORDS).upper() if rng.random() < 0.2 else rng.choice(WORDS)}, "
            f"{rng.choice(('Ann', 'Bo', 'Cy'))}" for _ in range(rng.randrange(0, 4)))
        venue = rng.choice(("", "journal of noisy data", "ISWC [isbn:978-3-030-00670-9]",
                            f"Acta {rng.choice(WORDS)} [issn:{make_issn(rng)}]"))
        rows.append(InputRecord(
            " ".join(ids), rng.choice(("a noisy title", "THE LOUD TITLE", "The FaBiO study", "")),
            authors, "", rng.choice(NOISY_DATES), venue, rng.choice(NOISY_VOLUMES),
            rng.choice(NOISY_ISSUES), rng.choice(NOISY_PAGES),
            rng.choice(("journal article", "book", "mystery type", "")),
            rng.choice(("", "Noisy Press [crossref:9]", "Another Press")),
        ))
    return rows
