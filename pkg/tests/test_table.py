import csv
import io

import pytest
from hypothesis import given, strategies as st

from bibcurate.table import (COLUMNS, CellParseError, InputRecord, StructuralError, parse_id_cell,
                             parse_people_cell, parse_venue_cell, read_curated_csv, read_rows,
                             write_curated_csv)
from bibcurate.curator import Curator

from conftest import TickingClock


def _csv(rows, header=COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def test_people_cell():
    people = parse_people_cell("Hunt, Glenn; Cleary, Michelle")
    assert [(p.family_name, p.given_name) for p in people] == [("Hunt", "Glenn"), ("Cleary", "Michelle")]
    [p] = parse_people_cell("Peroni, Silvio [orcid:0000-0003-0530-4305]")
    assert [str(e) for e in p.ids] == ["orcid:0000-0003-0530-4305"]


def test_publishers_keep_commas():
    [p] = parse_people_cell("Elsevier, Inc. [crossref:78]", organizations=True)
    assert p.is_organization and p.name == "Elsevier, Inc."


def test_venue_cell():
    v = parse_venue_cell("ISWC [isbn:978-3-030-00670-9]")
    assert v.name == "ISWC" and [str(e) for e in v.ids] == ["isbn:9783030006709"]
    assert parse_venue_cell("") is None


@pytest.mark.parametrize("cell", ["Roe, Ann [orcid:1", "Roe, Ann ]", "A [x] B"])
def test_bad_brackets(cell):
    with pytest.raises(CellParseError):
        parse_people_cell(cell)


def test_id_cell_dedup_and_bad_tokens():
    bad = []
    ids = parse_id_cell("doi:10.1/A doi:10.1/a nonsense pmid:7", bad.append)
    assert [str(e) for e in ids] == ["doi:10.1/a", "pmid:7"]
    assert len(bad) == 1


def test_read_rows_any_column_order():
    header = list(reversed(COLUMNS))
    row = [""] * 11
    row[header.index("title")] = "T"
    [(n, rec)] = read_rows(_csv([row], header))
    assert n == 1 and rec.title == "T"


def test_wrong_arity_is_quarantined():
    diags = []
    rows = read_rows(_csv([["a"] * 10, [""] * 11]), diags)
    assert len(rows) == 1 and diags[0].row == 1 and diags[0].branch == "quarantined"
    with pytest.raises(StructuralError):
        read_rows(_csv([["x"] * 11], header=["bad"] * 11))


def test_curated_csv_round_trip():
    curator = Curator(clock=TickingClock())
    rows = [InputRecord("doi:10.1/x", "A Title", "Roe, Ann [orcid:0000-0002-1825-0097]; Doe, Jo", "",
                        "2001-02", "J [issn:0138-9130]", "4", "2", "1-9", "journal article",
                        "Acme, Inc. [crossref:5]")]
    entities, _ = curator.curate_batch(rows)
    first = write_curated_csv(entities)
    again = write_curated_csv(read_curated_csv(first))
    assert again == first


cell_text = st.text(alphabet=st.characters(exclude_characters="\x00", exclude_categories=("Cs",)), max_size=15)


@given(st.lists(st.lists(cell_text, min_size=11, max_size=11), max_size=5))
def test_csv_quoting_round_trip(rows):
    got = read_rows(_csv(rows).encode("utf-8"))
    # only physically blank lines are skipped; eleven empty cells are still a row
    assert [rec.as_list() for _, rec in got] == rows
