import csv
import io
import json

import pytest

from bibcurate.cli import main
from bibcurate.table import COLUMNS

from test_curator import MERGED_ROW, PARTIAL_ROWS
from test_ocdm import NURSING

NOW = "2024-03-01T12:00:00"


def write_input(path, records):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow(r.as_list())
    path.write_text(buf.getvalue(), encoding="utf-8")
    return str(path)


@pytest.fixture
def partial_csv(tmp_path):
    return write_input(tmp_path / "in.csv", PARTIAL_ROWS)


def curate(store, source, *extra):
    return main(["curate", source, "--store", str(store), "--now", NOW, *extra])


def test_curate_writes_merged_row(tmp_path, partial_csv):
    out = tmp_path / "out.csv"
    assert curate(tmp_path / "store", partial_csv, "--no-omids", "-o", str(out)) == 0
    assert out.read_text(encoding="utf-8").splitlines()[1] == MERGED_ROW


def test_rerun_changes_nothing(tmp_path, partial_csv, capsys):
    store = tmp_path / "store"
    assert curate(store, partial_csv, "-o", str(tmp_path / "a.csv")) == 0
    main(["export", "--store", str(store), "-o", str(tmp_path / "one.nq")])
    assert curate(store, partial_csv, "-o", str(tmp_path / "b.csv")) == 0
    main(["export", "--store", str(store), "-o", str(tmp_path / "two.nq")])
    assert (tmp_path / "one.nq").read_bytes() == (tmp_path / "two.nq").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    store = tmp_path / "store"
    assert curate(store, str(tmp_path / "missing.csv")) == 1
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n", encoding="utf-8")
    assert curate(store, str(tmp_path / "bad.csv")) == 1
    (tmp_path / "empty.csv").write_text(",".join(COLUMNS) + "\n", encoding="utf-8")
    assert curate(store, str(tmp_path / "empty.csv")) == 0
    short = tmp_path / "short.csv"
    short.write_text(",".join(COLUMNS) + "\ndoi:10.1000/a,x\n", encoding="utf-8")
    diag = tmp_path / "diag.txt"
    assert curate(store, str(short), "--diagnostics", str(diag)) == 2
    assert "quarantined" in diag.read_text(encoding="utf-8")


def test_stats_and_lookup(tmp_path, capsys):
    store = tmp_path / "store"
    assert curate(store, write_input(tmp_path / "n.csv", [NURSING]), "-o", str(tmp_path / "o.csv")) == 0
    capsys.readouterr()
    assert main(["stats", "--store", str(store), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["author_roles"] == 2 and report["by_year"] == {"2012": 1}
    assert main(["lookup", "--store", str(store), "doi:10.1111/j.1365-2648.2012.06023.x"]) == 0
    [row] = json.loads(capsys.readouterr().out)
    assert row["page"] == "1905-1908"
    assert main(["lookup", "--store", str(store), "-q", "volume=5"]) == 1
    assert main(["lookup", "--store", str(store), "-q", "venue=nursing&volume=68"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 1


def test_export_import_round_trip(tmp_path, partial_csv, capsys):
    store = tmp_path / "store"
    curate(store, partial_csv, "-o", str(tmp_path / "o.csv"))
    dump = tmp_path / "dump.nq"
    assert main(["export", "--store", str(store), "-o", str(dump)]) == 0
    assert main(["import", "--store", str(tmp_path / "copy"), str(dump)]) == 0
    again = tmp_path / "again.nq"
    main(["export", "--store", str(tmp_path / "copy"), "-o", str(again)])
    assert again.read_bytes() == dump.read_bytes()
    assert main(["import", "--store", str(store), str(dump)]) == 1
    assert main(["compact", "--store", str(store)]) == 0
    assert main(["export", "--store", str(store), "--format", "jsonld"]) == 0
    assert json.loads(capsys.readouterr().out)


def test_verify_ids(capsys):
    assert main(["verify-ids", "orcid:0000-0003-0530-4305", "issn:0028-0836"]) == 0
    out = capsys.readouterr().out
    assert out.count("\tvalid") == 2
    assert main(["verify-ids", "issn:0028-0837"]) == 1
    assert main(["verify-ids", "nonsense"]) == 1
