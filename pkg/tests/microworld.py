"""Exhaustive small worlds for the resolution decision."""

from __future__ import annotations

import itertools

from bibcurate.curator import UnknownOmidError, branch_predicates, decide
from bibcurate.ids import ExternalId
from bibcurate.omid import OMID, ResolutionIndex

from oracles import expected_branch

POOL = [ExternalId("doi", f"10.1/{c}") for c in "abc"] + [ExternalId("pmid", "1")]


def worlds(max_entities: int = 3):
    """Yield ``(entities, owner)``: each pool id belongs to one stored entity or none."""
    for n in range(max_entities + 1):
        entities = [OMID("br", "060", i + 1) for i in range(n)]
        for owners in itertools.product([None, *entities], repeat=len(POOL)):
            yield entities, dict(zip(POOL, owners))


def inputs(entities):
    id_sets = [()] + [(x,) for x in POOL] + list(itertools.combinations(POOL, 2))
    for ids in id_sets:
        for csv_omid in [None, *entities]:
            yield list(ids), csv_omid


def build_index(entities, owner) -> ResolutionIndex:
    index = ResolutionIndex()
    for omid in entities:
        index.register(omid)
    for ext, omid in owner.items():
        if omid is not None:
            index.bind(str(ext), omid)
    return index


def enumerate_decisions(max_entities: int = 3):
    """Check every micro-world input; returns the number of cases checked."""
    checked = 0
    for entities, owner in worlds(max_entities):
        index = build_index(entities, owner)
        for ids, csv_omid in inputs(entities):
            hits = {owner[e] for e in ids if owner[e] is not None}
            fired = [k for k, v in branch_predicates(bool(ids), csv_omid, hits).items() if v]
            assert len(fired) == 1, (ids, csv_omid, hits, fired)
            outcome = decide(ids, csv_omid, index)
            want = expected_branch(csv_omid, set(ids), hits)
            assert outcome.case == want == fired[0], (ids, csv_omid, hits, outcome)
            if want == "merge_single":
                assert outcome.target == next(iter(hits))
            elif csv_omid is not None:
                assert outcome.target == csv_omid
                assert outcome.conflicts == frozenset(hits - {csv_omid})
            checked += 1
        # an OMID the store never issued is refused, whatever the ids say
        try:
            decide([], OMID("br", "060", 99), index)
        except UnknownOmidError:
            pass
        else:
            raise AssertionError("unknown OMID accepted")
    return checked
