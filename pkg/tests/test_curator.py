from hypothesis import given, settings, strategies as st
import pytest

from bibcurate.curator import (CONFLICT_NEW, MERGE_SINGLE, NEW, OMID_CONFLICT_MERGE, OMID_MERGE,
                               OMID_UPDATE, QUARANTINED, Curator, merge, merge_roles)
from bibcurate.ids import ExternalId
from bibcurate.model import AUTHOR, Agent, AgentRole, CuratedEntity
from bibcurate.omid import OMID
from bibcurate.service import LookupService
from bibcurate.table import InputRecord, write_curated_csv

from conftest import TickingClock
from microworld import enumerate_decisions
from synth import generate

PARTIAL_ROWS = [
    InputRecord("doi:10.1007/978-3-030-00668-6_8", "The SPAR Ontologies",
                "Peroni, Silvio [orcid:0000-0003-0530-4305]", "", "", "ISWC [isbn:978-3-030-00670-9]",
                "", "", "", "", ""),
    InputRecord("doi:10.1007/978-3-030-00668-6_8", "", "Shotton, David; Peroni, Silvio [orcid:0000-0003-0530-4305]",
                "", "2018", "", "", "", "119-136", "book chapter", ""),
]
MERGED_ROW = ('doi:10.1007/978-3-030-00668-6_8,The SPAR Ontologies,'
               '"Peroni, Silvio [orcid:0000-0003-0530-4305]; Shotton, David",,2018,'
               'ISWC [isbn:978-3-030-00670-9],,,119-136,book chapter,')


def _curator():
    return Curator(clock=TickingClock())


def _row(ids, title="", author="", omid=None, **kw):
    cell = " ".join(([f"omid:{omid}"] if omid else []) + ids)
    return InputRecord(cell, title, author, "", kw.get("date", ""), kw.get("venue", ""), "", "",
                       kw.get("page", ""), kw.get("type", "journal article"), "")


def _branches(diags):
    return list(dict.fromkeys(d.branch for d in diags if d.field == "br"))


def test_decision_micro_worlds():
    assert enumerate_decisions() > 10_000


def test_partial_rows_merge_in_one_batch():
    curator = _curator()
    entities, _ = curator.curate_batch(PARTIAL_ROWS)
    assert len(entities) == 1
    text = write_curated_csv(entities, include_omids=False).decode()
    assert text.splitlines()[1] == MERGED_ROW


def test_partial_rows_merge_across_batches():
    curator = _curator()
    curator.curate_batch(PARTIAL_ROWS[:1])
    entities, diags = curator.curate_batch(PARTIAL_ROWS[1:])
    assert MERGE_SINGLE in _branches(diags)
    assert write_curated_csv(entities, include_omids=False).decode().splitlines()[1] == MERGED_ROW


def test_six_outcomes_through_batches():
    c = _curator()
    [a], _ = c.curate_batch([_row(["doi:10.1000/a"], "Alpha")])
    [b], _ = c.curate_batch([_row(["doi:10.1000/b"], "Beta")])
    _, d = c.curate_batch([_row(["doi:10.1000/new"], "New")])
    assert _branches(d) == [NEW]
    _, d = c.curate_batch([_row(["doi:10.1000/a", "pmid:5"], "Alpha again")])
    assert _branches(d) == [MERGE_SINGLE]
    assert c.index.lookup("br", "pmid:5") == a.omid
    [conf], d = c.curate_batch([_row(["doi:10.1000/a", "doi:10.1000/b"], "Both")])
    assert _branches(d) == [CONFLICT_NEW] and conf.omid not in (a.omid, b.omid)
    # the conflicting ids stay with their owners
    assert c.index.lookup("br", "doi:10.1000/a") == a.omid
    [upd], d = c.curate_batch([_row([], "Ignored Title", omid=a.omid, page="1-2")])
    assert _branches(d) == [OMID_UPDATE] and upd.omid == a.omid
    assert upd.title == "Alpha" and upd.pages.start == "1"
    _, d = c.curate_batch([_row(["doi:10.1000/a", "pmid:9"], omid=a.omid)])
    assert _branches(d) == [OMID_MERGE] and c.index.lookup("br", "pmid:9") == a.omid
    [res], d = c.curate_batch([_row(["doi:10.1000/b"], omid=a.omid)])
    assert _branches(d) == [OMID_CONFLICT_MERGE] and res.omid == a.omid
    assert c.index.lookup("br", "doi:10.1000/b") == b.omid


def test_unknown_omid_quarantines_only_that_row():
    c = _curator()
    entities, diags = c.curate_batch([_row([], "X", omid="br/06099"), _row(["doi:10.1000/ok"], "Ok")])
    assert [e.title for e in entities] == ["Ok"]
    assert [d.row for d in diags if d.branch == QUARANTINED] == [1]


def test_rerun_is_idempotent_on_synthetic_rows():
    rows, _, _ = generate(300, seed=11)
    c = _curator()
    first, _ = c.curate_batch(rows)
    snaps, records = c.prov.snapshot_count(), dict(c.records)
    second, _ = c.curate_batch(rows)
    assert c.prov.snapshot_count() == snaps
    assert c.records == records
    assert [e.omid for e in first] == [e.omid for e in second]


def test_conflict_rerun_reuses_conflict_entity():
    c = _curator()
    c.curate_batch([_row(["doi:10.1000/a"], "A"), _row(["doi:10.1000/b"], "B")])
    [x], _ = c.curate_batch([_row(["doi:10.1000/a", "doi:10.1000/b"], "AB")])
    n = c.prov.snapshot_count()
    [y], _ = c.curate_batch([_row(["doi:10.1000/a", "doi:10.1000/b"], "AB")])
    assert x.omid == y.omid and c.prov.snapshot_count() == n


def test_admin_merge_keeps_old_omid_resolvable():
    c = _curator()
    [a], _ = c.curate_batch([_row(["doi:10.1000/a"], "Alpha", "Roe, Ann")])
    [b], _ = c.curate_batch([_row(["doi:10.1000/b"], "Beta", "Doe, Jo")])
    c.merge_entities(a.omid, [b.omid])
    service = LookupService(c)
    [row] = service.lookup([f"omid:{b.omid}"])
    assert row["id"].split()[0] == f"omid:{a.omid}"
    assert "doi:10.1000/b" in row["id"]
    assert row["author"].count(";") == 1
    assert service.lookup(["doi:10.1000/b"]) == [row]
    c.prov.check_invariants()
    assert c.rebuild_index().merge_chain == c.index.merge_chain


def test_deleted_entity_ids_start_fresh():
    c = _curator()
    [a], _ = c.curate_batch([_row(["doi:10.1000/a"], "Alpha")])
    c.delete_entity(a.omid)
    assert a.omid not in c.records
    [again], d = c.curate_batch([_row(["doi:10.1000/a"], "Alpha")])
    assert _branches(d) == [NEW] and again.omid != a.omid


def test_failed_cluster_rolls_back(monkeypatch):
    c = _curator()
    c.curate_batch([_row(["doi:10.1000/a"], "Alpha", "Roe, Ann")])
    before, snaps = dict(c.records), c.prov.snapshot_count()

    def boom(*args, **kwargs):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(c, "_materialize_pages", boom)
    entities, diags = c.curate_batch([_row(["doi:10.1000/a"], "Alpha", "Roe, Ann; New, Person", page="1-3")])
    assert entities == []
    assert [d.row for d in diags if d.branch == QUARANTINED] == [1]
    assert c.records == before and c.prov.snapshot_count() == snaps


# -- merge properties ---------------------------------------------------------

names = st.sampled_from(["Roe", "Doe", "Poe", "Moe"])
orcids = st.sampled_from([None, "0000-0002-1825-0097", "0000-0003-0530-4305"])


@st.composite
def people(draw):
    out = []
    for fam in draw(st.lists(names, unique=True, max_size=4)):
        orcid = draw(orcids)
        ids = [ExternalId("orcid", orcid)] if orcid and all(ExternalId("orcid", orcid) not in p.agent.ids
                                                           for p in out) else []
        out.append(AgentRole(AUTHOR, Agent(fam, "A", ids=ids)))
    return out


@st.composite
def entities(draw):
    return CuratedEntity(
        ids=[ExternalId("doi", d) for d in draw(st.lists(st.sampled_from(["10.1000/a", "10.1000/b", "10.1000/c"]),
                                                         unique=True, max_size=2))],
        title=draw(st.sampled_from(["", "T1", "T2"])),
        type=draw(st.sampled_from(["", "journal article", "book"])),
        authors=draw(people()),
    )


@settings(max_examples=200)
@given(entities(), entities())
def test_merge_properties(s, i):
    m = merge(s, i)
    assert set(m.ids) == set(s.ids) | set(i.ids)
    assert m.title == (s.title or i.title)
    assert m.type == (s.type or i.type)
    # surviving authors keep their relative order at the front
    assert [r.agent.family for r in m.authors[:len(s.authors)]] == [r.agent.family for r in s.authors]
    assert len(m.authors) <= len(s.authors) + len(i.authors)
    again = merge(m, i)
    assert [r.agent.family for r in again.authors] == [r.agent.family for r in m.authors]


@given(people())
def test_merge_roles_with_itself_is_identity(roles):
    assert [r.agent.family for r in merge_roles(roles, roles)] == [r.agent.family for r in roles]
