"""Text clean-up rules applied to every input cell before deduplication."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


# ---------------------------------------------------------------------------
# spaces and hyphens

# \s already covers every Zs character; add the zero-width look-alikes
_SPACE_RUN = re.compile("[\\s\u200b\u2060\ufeff]+")

# Unicode Pd (dash punctuation) minus U+002D itself, plus minus-sign look-alikes
DASH_CHARS = (
    "\u058a\u05be\u1400\u1806\u2010\u2011\u2012\u2013\u2014\u2015\u2e17\u2e1a"
    "\u2e3a\u2e3b\u2e40\u2e5d\u301c\u3030\u30a0\ufe31\ufe32\ufe58\ufe63\uff0d"
    "\U00010ead"
    "\u2212\u2796\u2043"
)
_DASH_TABLE = str.maketrans({ch: "-" for ch in DASH_CHARS})

HYPHEN_FIELDS = frozenset({"id", "page", "volume", "issue", "author", "editor"})


def fold_spaces(text: str) -> str:
    """Map every space-like code point to U+0020, collapse runs, trim."""
    return _SPACE_RUN.sub(" ", text).strip()


def fold_hyphens(text: str, field_kind: str) -> str:
    """Replace dash look-alikes with U+002D in the fields where that is safe."""
    if field_kind not in HYPHEN_FIELDS:
        return text
    return text.translate(_DASH_TABLE)


# ---------------------------------------------------------------------------
# casing

def _has_inner_capital(word: str) -> bool:
    letters = [c for c in word if c.isalpha()]
    return any(c.isupper() for c in letters[1:])


def _capitalize_first(word: str) -> str:
    for i, c in enumerate(word):
        if c.isalpha():
            # title() not upper(): "ß" must become "Ss", not "SS"
            return word[:i] + c.title() + word[i + 1:]
    return word


def _is_shouted(text: str) -> bool:
    # only words with two or more cased letters count; single letters and a
    # lone all-caps word ("ISWC") say nothing about the whole title
    words = [[c for c in w if c.isupper() or c.islower()] for w in text.split()]
    words = [w for w in words if len(w) >= 2]
    return len(words) >= 2 and all(c.isupper() for w in words for c in w)


def title_case(text: str) -> str:
    """Capitalise each word, sparing words with inner capitals.

    A fully upper-case string has no trustworthy acronyms, so every word is
    recased in that case.
    """
    if _is_shouted(text):
        return " ".join(_capitalize_first(w.lower()) for w in text.split(" "))
    out = []
    for word in text.split(" "):
        out.append(word if _has_inner_capital(word) else _capitalize_first(word))
    return " ".join(out)


# ---------------------------------------------------------------------------
# dates

@dataclass(frozen=True, order=True)
class NormalizedDate:
    year: int
    month: Optional[int] = None
    day: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.year <= 9999:
            raise ValueError(f"year out of range: {self.year}")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None:
            if self.month is None:
                raise ValueError("day without month")
            if not 1 <= self.day <= days_in_month(self.year, self.month):
                raise ValueError(f"invalid day {self.day} for {self.year}-{self.month}")

    @property
    def precision(self) -> str:
        if self.day is not None:
            return "day"
        return "month" if self.month is not None else "year"

    def __str__(self) -> str:
        text = f"{self.year:04d}"
        if self.month is not None:
            text += f"-{self.month:02d}"
        if self.day is not None:
            text += f"-{self.day:02d}"
        return text


def is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def days_in_month(year: int, month: int) -> int:
    if month == 2:
        return 29 if is_leap(year) else 28
    return 30 if month in (4, 6, 9, 11) else 31


def parse_date(text: str) -> Optional[NormalizedDate]:
    """Parse ``YYYY[-MM[-DD]]``, truncating at the first invalid component.

    Returns None when not even the year survives.
    """
    parts = fold_spaces(text or "").split("-")
    if not re.fullmatch(r"[0-9]{4}", parts[0]):
        return None
    year = int(parts[0])
    if len(parts) < 2 or not re.fullmatch(r"[0-9]{1,2}", parts[1]) or not 1 <= int(parts[1]) <= 12:
        return NormalizedDate(year)
    month = int(parts[1])
    if (len(parts) < 3 or len(parts) > 3 or not re.fullmatch(r"[0-9]{1,2}", parts[2])
            or not 1 <= int(parts[2]) <= days_in_month(year, month)):
        return NormalizedDate(year, month)
    return NormalizedDate(year, month, int(parts[2]))


# ---------------------------------------------------------------------------
# volume / issue

VOLUME_KEYWORDS = [
    "original series", "volume", "vol", "tome", "tomo", "cilt", "volumen", "band", "jahrgang",
]
ISSUE_KEYWORDS = [
    "special issue", "issue", "hors-série", "hors série", "özel sayı", "sayı", "numéro",
    "número", "number", "heft", "fascicolo", "n°", "no", "nr", "num",
]

VOLUME = "volume"
ISSUE = "issue"
NEITHER = "neither"


@dataclass(frozen=True)
class ContainerValue:
    kind: str
    value: str


class KeywordTable:
    """Per-class keyword lists, matched case-insensitively on letter boundaries."""

    def __init__(self, volume=None, issue=None):
        self.volume = list(volume if volume is not None else VOLUME_KEYWORDS)
        self.issue = list(issue if issue is not None else ISSUE_KEYWORDS)
        self._patterns = {VOLUME: self._compile(self.volume), ISSUE: self._compile(self.issue)}

    @staticmethod
    def _compile(words):
        # longest first so "special issue" wins over "issue"
        alternatives = "|".join(re.escape(w) for w in sorted(words, key=len, reverse=True))
        return re.compile(rf"(?<![^\W\d_])(?:{alternatives})(?![^\W\d_])", re.IGNORECASE)

    @classmethod
    def from_file(cls, path) -> "KeywordTable":
        """Load ``[volume]`` / ``[issue]`` sections, one keyword per line."""
        sections = {VOLUME: [], ISSUE: []}
        current = None
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in sections:
                    raise ValueError(f"unknown keyword section {line}")
                continue
            if current is None:
                raise ValueError("keyword listed before any [volume]/[issue] header")
            sections[current].append(line.lower())
        return cls(sections[VOLUME], sections[ISSUE])

    def find(self, kind: str, text: str):
        return self._patterns[kind].search(text)


DEFAULT_KEYWORDS = KeywordTable()


def classify_container(text: str, keywords: KeywordTable = DEFAULT_KEYWORDS) -> ContainerValue:
    """Tell whether a value reads as a volume, an issue, or neither.

    When both kinds of keyword occur the earliest one decides.
    """
    value = fold_spaces(text or "")
    vol = keywords.find(VOLUME, value)
    iss = keywords.find(ISSUE, value)
    if vol and (not iss or vol.start() <= iss.start()):
        return ContainerValue(VOLUME, value)
    if iss:
        return ContainerValue(ISSUE, value)
    return ContainerValue(NEITHER, value)


_PREFIX_JUNK = re.compile(r"^[^A-Za-z0-9]+(?=\d)")
_SUFFIX_JUNK = re.compile(r"(?<=\d)[^A-Za-z0-9]+$")
_ENCODED_RANGE = re.compile(r"^(\d+)\s*[^A-Za-z0-9\s]+\s*(\d+)$")


def strip_prefix(value: str) -> str:
    return _PREFIX_JUNK.sub("", value)


def strip_suffix(value: str) -> str:
    return _SUFFIX_JUNK.sub("", value)


def repair_encoding(value: str) -> str:
    """``38â39`` / ``3???4`` -> ``38-39`` / ``3-4``: keep the outer numbers only."""
    m = _ENCODED_RANGE.match(value)
    return f"{m.group(1)}-{m.group(2)}" if m else value


def _keyword_number(segment: str, kind: str, keywords: KeywordTable) -> str:
    m = keywords.find(kind, segment)
    if m and m.start() == 0:
        rest = re.fullmatch(r"[^A-Za-z0-9]*(\d+)", segment[m.end():])
        if rest:
            return rest.group(1)
    return segment.strip()


def split_combined(value: str, keywords: KeywordTable = DEFAULT_KEYWORDS):
    """Split ``Vol. 35 N° spécial 1`` into its volume and issue parts.

    Returns ``(volume, issue)`` or None when the value does not hold both.
    """
    vol = keywords.find(VOLUME, value)
    iss = keywords.find(ISSUE, value)
    if not vol or not iss:
        return None
    if vol.start() < iss.start():
        vol_seg, iss_seg = value[vol.start():iss.start()], value[iss.start():]
    else:
        iss_seg, vol_seg = value[iss.start():vol.start()], value[vol.start():]
    vol_seg = vol_seg.strip(" ,;/")
    iss_seg = iss_seg.strip(" ,;/")
    return _keyword_number(vol_seg, VOLUME, keywords), _keyword_number(iss_seg, ISSUE, keywords)


def _clean(value: str) -> str:
    if not value:
        return value
    value = strip_prefix(value)
    value = strip_suffix(value)
    return repair_encoding(value)


def repair_volume_issue(volume: str, issue: str,
                        keywords: KeywordTable = DEFAULT_KEYWORDS) -> tuple[str, str]:
    """Fix the six families of volume/issue errors.

    Combined values are split first, then junk prefixes/suffixes and
    mis-encoded range separators are cleaned, and finally values sitting in
    the wrong field are moved or swapped. A misplaced value whose proper
    field is already taken by a correct value is dropped.
    """
    volume = fold_spaces(volume or "")
    issue = fold_spaces(issue or "")
    # a move can unblock a split, so run passes until nothing changes
    for _ in range(8):
        fixed = _repair_pass(volume, issue, keywords)
        if fixed == (volume, issue):
            break
        volume, issue = fixed
    return volume, issue


def _repair_pass(volume: str, issue: str, keywords: KeywordTable) -> tuple[str, str]:
    for source in ("volume", "issue"):
        text = volume if source == "volume" else issue
        parts = split_combined(text, keywords)
        if parts is None:
            continue
        vol_part, iss_part = parts
        other = issue if source == "volume" else volume
        other_target = iss_part if source == "volume" else vol_part
        if other and other != other_target:
            continue
        volume, issue = vol_part, iss_part

    volume, issue = _clean(volume), _clean(issue)

    vol_kind = classify_container(volume, keywords).kind if volume else NEITHER
    iss_kind = classify_container(issue, keywords).kind if issue else NEITHER
    if iss_kind == VOLUME and vol_kind == ISSUE:
        volume, issue = issue, volume
    elif iss_kind == VOLUME:
        if not volume:
            volume = issue
        issue = ""
    elif vol_kind == ISSUE:
        if not issue:
            issue = volume
        volume = ""
    return volume, issue


def parse_pages(text: str) -> Optional[tuple[str, str]]:
    """``'1905-1908'`` -> ``('1905', '1908')``; a single page gives start == end."""
    value = repair_encoding(fold_hyphens(fold_spaces(text or ""), "page"))
    if not value:
        return None
    start, sep, end = value.partition("-")
    start, end = start.strip(), end.strip()
    if not sep or not end:
        return start, start
    if not start:
        return end, end
    return start, end


def render_pages(start: str, end: str) -> str:
    if not start and not end:
        return ""
    if start == end or not end:
        return start
    return f"{start}-{end}"
