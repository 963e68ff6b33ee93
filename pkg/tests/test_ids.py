import random

import pytest
from hypothesis import given, strategies as st

from bibcurate.ids import (ExistenceCache, NOT_FOUND, OfflineResolver, UNKNOWN, VERIFIED, ExternalId,
                           NormalizationError, display_value, isbn_check, issn_check, make_id,
                           normalize_id, orcid_check, parse_token, screen_ids, validate_syntax,
                           verify_existence)

from oracles import (isbn10_check_digit, isbn10_ok, isbn13_check_digit, isbn13_ok, issn_check_digit,
                     issn_ok, orcid_check_digit, orcid_ok)


def _digits(rng, n):
    return "".join(str(rng.randrange(10)) for _ in range(n))


def _perturb(rng, value):
    positions = [i for i, c in enumerate(value) if c.isdigit() or c == "X"]
    i = rng.choice(positions)
    new = rng.choice([d for d in "0123456789" if d != value[i]])
    return value[:i] + new + value[i + 1:]


def test_check_digits_agree_with_oracles():
    rng = random.Random(7)
    for _ in range(1000):
        b13 = rng.choice(("978", "979")) + _digits(rng, 9)
        v13 = b13 + isbn13_check_digit(b13)
        b10 = _digits(rng, 9)
        v10 = b10 + isbn10_check_digit(b10)
        b7 = _digits(rng, 7)
        issn = f"{b7[:4]}-{b7[4:]}{issn_check_digit(b7)}"
        b15 = _digits(rng, 15)
        full = b15 + orcid_check_digit(b15)
        orcid = "-".join(full[i:i + 4] for i in range(0, 16, 4))
        for value in (v13, v10, _perturb(rng, v13), _perturb(rng, v10)):
            assert isbn_check(value) == (isbn13_ok(value) if len(value) == 13 else isbn10_ok(value)), value
        for value in (issn, _perturb(rng, issn)):
            assert issn_check(value) == issn_ok(value), value
        for value in (orcid, _perturb(rng, orcid)):
            assert orcid_check(value) == orcid_ok(value), value


@pytest.mark.parametrize("scheme,value,ok", [
    ("orcid", "0000-0003-0530-4305", True),
    ("orcid", "0000-0002-1825-0097", True),
    ("orcid", "0000-0002-1825-0098", False),
    ("isbn", "9783030006709", True),
    ("isbn", "9783030006708", False),
    ("issn", "0138-9130", True),
    ("issn", "1588-2861", True),
    ("issn", "0138-9131", False),
    ("doi", "10.1007/978-3-030-00668-6_8", True),
    ("doi", "11.1007/x", False),
    ("pmid", "123", True),
    ("pmid", "12a", False),
    ("omid", "br/0601", True),
    ("omid", "br/0600", False),
])
def test_known_values(scheme, value, ok):
    assert validate_syntax(scheme, value) is ok


@pytest.mark.parametrize("scheme,raw,expected", [
    ("doi", "10.1111/J.1365-2648.2012.06023.X", "10.1111/j.1365-2648.2012.06023.x"),
    ("doi", "https://doi.org/10.1000/ABC", "10.1000/abc"),
    ("doi", "doi: 10.1000/x%2Fy", "10.1000/x/y"),
    ("isbn", "978-3-030-00670-9", "9783030006709"),
    ("issn", "01389130", "0138-9130"),
    ("orcid", "https://orcid.org/0000-0003-0530-4305", "0000-0003-0530-4305"),
    ("pmid", "000123", "123"),
    ("omid", "BR/0601", "br/0601"),
])
def test_normalize_id(scheme, raw, expected):
    assert normalize_id(scheme, raw) == expected


def test_empty_after_normalization():
    with pytest.raises(NormalizationError):
        normalize_id("isbn", "---")
    with pytest.raises(ValueError):
        parse_token("no-separator")


def test_isbn_display_is_masked_but_identity_is_digits():
    ext = make_id("isbn", "978-3-030-00670-9")
    assert ext.value == "9783030006709"
    assert display_value(ext) == "978-3-030-00670-9"


@given(st.text(max_size=40))
def test_validators_are_total(text):
    for scheme in ("doi", "isbn", "issn", "orcid", "pmid", "omid", "other"):
        assert validate_syntax(scheme, text) in (True, False)


@given(st.sampled_from(["doi", "isbn", "issn", "orcid", "pmid"]), st.text(min_size=1, max_size=30))
def test_normalization_is_idempotent(scheme, raw):
    try:
        once = normalize_id(scheme, raw)
    except NormalizationError:
        return
    assert normalize_id(scheme, once) == once


class FakeClient:
    def __init__(self, answers):
        self.answers = answers
        self.calls = 0

    def lookup(self, scheme, value):
        self.calls += 1
        return self.answers.get(value, NOT_FOUND)


def test_existence_cache_round_trip(tmp_path):
    client = FakeClient({"10.1/a": VERIFIED})
    cache = ExistenceCache(tmp_path / "cache.csv")
    assert verify_existence("doi", "10.1/a", client, cache) == VERIFIED
    assert verify_existence("doi", "10.1/a", client, cache) == VERIFIED
    assert client.calls == 1
    cache.save()
    again = ExistenceCache(tmp_path / "cache.csv")
    assert verify_existence("doi", "10.1/a", FakeClient({}), again) == VERIFIED


def test_offline_resolver_is_unknown():
    assert OfflineResolver().lookup("doi", "10.1/a") == UNKNOWN


def test_screen_ids_drops_unregistered():
    ids = [ExternalId("doi", "10.1/a"), ExternalId("doi", "10.1/b")]
    out = screen_ids(ids, FakeClient({"10.1/a": VERIFIED}))
    assert [str(e) for e in out] == ["doi:10.1/a"]
    assert out[0].existence == VERIFIED
