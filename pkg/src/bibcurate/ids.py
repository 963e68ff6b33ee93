"""External identifier schemes: normalization, check digits and existence lookups."""

from __future__ import annotations

import csv
import logging
import os
import re
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional
from urllib.parse import quote, unquote

logger = logging.getLogger(__name__)

KNOWN_SCHEMES = ("doi", "pmid", "issn", "isbn", "orcid", "omid")

VERIFIED = "verified"
NOT_FOUND = "not_found"
UNKNOWN = "unknown"

# only these registries expose a usable existence check
VERIFIABLE_SCHEMES = frozenset({"doi", "orcid"})


class NormalizationError(ValueError):
    """Raised when an identifier value is empty after normalization."""


@dataclass(frozen=True)
class ExternalId:
    """A ``scheme:value`` pair. Equality and hashing use the pair only."""

    scheme: str
    value: str
    syntax_valid: bool = field(default=True, compare=False)
    existence: str = field(default=UNKNOWN, compare=False)
    # OMID of the ``id`` entity standing for this identifier, once curated
    omid: Optional[object] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.scheme}:{self.value}"

    @property
    def key(self) -> str:
        return str(self)

    def with_existence(self, status: str) -> "ExternalId":
        return replace(self, existence=status)


_DOI_RESOLVER = re.compile(r"^(?:https?://)?(?:dx\.)?doi\.org/", re.IGNORECASE)
_DOI_PREFIX = re.compile(r"^doi:\s*", re.IGNORECASE)


def normalize_id(scheme: str, raw_value: str) -> str:
    """Return the canonical text of ``raw_value`` under ``scheme``.

    Raises:
        NormalizationError: nothing is left once the value has been cleaned.
    """
    scheme = scheme.strip().lower()
    value = raw_value.strip() if raw_value else ""
    if scheme == "doi":
        value = _DOI_PREFIX.sub("", _DOI_RESOLVER.sub("", unquote(value)))
        value = re.sub(r"\s+", "", value).lower()
    elif scheme == "issn":
        digits = re.sub(r"[^0-9X]", "", value.upper())
        value = f"{digits[:4]}-{digits[4:]}" if len(digits) == 8 else digits
    elif scheme == "isbn":
        value = re.sub(r"[^0-9X]", "", value.upper())
    elif scheme == "orcid":
        value = re.sub(r"^(?:https?://)?orcid\.org/", "", value, flags=re.IGNORECASE)
        digits = re.sub(r"[^0-9X]", "", value.upper())
        if len(digits) == 16:
            value = "-".join(digits[i:i + 4] for i in range(0, 16, 4))
        else:
            value = digits
    elif scheme == "pmid":
        value = value.lstrip("0") if value.strip("0") else value
    elif scheme == "omid":
        value = value.lower()
    if not value:
        raise NormalizationError(f"empty {scheme} identifier after normalization: {raw_value!r}")
    return value


def isbn_check(value: str) -> bool:
    if len(value) == 10:
        if not re.fullmatch(r"\d{9}[\dX]", value):
            return False
        total = sum((10 - i) * (10 if c == "X" else int(c)) for i, c in enumerate(value))
        return total % 11 == 0
    if len(value) == 13:
        if not value.isdigit() or not value.startswith(("978", "979")):
            return False
        total = sum(int(c) * (1 if i % 2 == 0 else 3) for i, c in enumerate(value))
        return total % 10 == 0
    return False


def issn_check(value: str) -> bool:
    if not re.fullmatch(r"\d{4}-\d{3}[\dX]", value):
        return False
    digits = value.replace("-", "")
    total = sum(int(c) * (8 - i) for i, c in enumerate(digits[:7]))
    check = (11 - total % 11) % 11
    return digits[7] == ("X" if check == 10 else str(check))


def orcid_check(value: str) -> bool:
    """ISO 7064 MOD 11-2 over the first fifteen digits."""
    if not re.fullmatch(r"\d{4}-\d{4}-\d{4}-\d{3}[\dX]", value):
        return False
    digits = value.replace("-", "")
    total = 0
    for c in digits[:15]:
        total = (total + int(c)) * 2
    check = (12 - total % 11) % 11
    return digits[15] == ("X" if check == 10 else str(check))


_DOI_SYNTAX = re.compile(r"^10\.\d{4,}(?:\.\d+)*/\S+$")
_OMID_SYNTAX = re.compile(r"^(br|ra|ar|re|id)/06[1-9]*0[1-9]\d*$")


def validate_syntax(scheme: str, value: str) -> bool:
    """Check-digit / pattern test for a canonical value. Never raises."""
    try:
        if scheme == "isbn":
            return isbn_check(value)
        if scheme == "issn":
            return issn_check(value)
        if scheme == "orcid":
            return orcid_check(value)
        if scheme == "doi":
            return bool(_DOI_SYNTAX.match(value))
        if scheme == "pmid":
            return value.isdigit()
        if scheme == "omid":
            return bool(_OMID_SYNTAX.match(value))
        return bool(value)
    except Exception:  # defensive: validators are documented as total
        return False


def make_id(scheme: str, raw_value: str) -> ExternalId:
    """Normalize and syntax-check in one step."""
    scheme = scheme.strip().lower()
    value = normalize_id(scheme, raw_value)
    return ExternalId(scheme, value, validate_syntax(scheme, value))


def parse_token(token: str) -> ExternalId:
    """Parse ``scheme:value``; raises ValueError when the separator is missing."""
    scheme, sep, value = token.partition(":")
    if not sep or not scheme.strip():
        raise ValueError(f"identifier token without scheme separator: {token!r}")
    return make_id(scheme, value)


def display_value(ext: ExternalId) -> str:
    """Human-facing rendering; ISBNs get their registration-group hyphens back."""
    if ext.scheme == "isbn":
        import isbnlib

        masked = isbnlib.mask(ext.value)
        if masked:
            return masked
    return ext.value


# ---------------------------------------------------------------------------
# existence verification

class OfflineResolver:
    """Client that never contacts a registry."""

    def lookup(self, scheme: str, value: str) -> str:
        return UNKNOWN


DEFAULT_URL_TEMPLATES = {
    "doi": "https://doi.org/api/handles/{value}",
    "orcid": "https://pub.orcid.org/v3.0/{value}",
}


class HttpResolver:
    """Registry client over HTTP.

    A 2xx answer means the id exists, 404 means it does not; anything else,
    including network failures after one retry, yields ``unknown``.
    """

    def __init__(self, url_templates: Optional[dict] = None, timeout: float = 10.0,
                 retries: int = 1, session=None):
        self.url_templates = dict(DEFAULT_URL_TEMPLATES)
        if url_templates:
            self.url_templates.update(url_templates)
        self.timeout = timeout
        self.retries = retries
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    def lookup(self, scheme: str, value: str) -> str:
        template = self.url_templates.get(scheme)
        if template is None:
            return UNKNOWN
        url = template.format(value=quote(value, safe="/"))
        for attempt in range(self.retries + 1):
            try:
                response = self.session.get(url, timeout=self.timeout,
                                            headers={"Accept": "application/json"})
            except Exception as exc:
                logger.warning("existence check %s:%s failed (attempt %d): %s",
                               scheme, value, attempt + 1, exc)
                continue
            if response.status_code == 404:
                return NOT_FOUND
            if 200 <= response.status_code < 300:
                if scheme == "doi":
                    return self._doi_handle_status(response)
                return VERIFIED
            logger.warning("existence check %s:%s got HTTP %s", scheme, value,
                           response.status_code)
        return UNKNOWN

    @staticmethod
    def _doi_handle_status(response) -> str:
        # the handle API answers 200 with responseCode 1 for registered DOIs
        try:
            code = response.json().get("responseCode")
        except Exception:
            return VERIFIED
        if code is None or code == 1:
            return VERIFIED
        if code == 100:
            return NOT_FOUND
        return UNKNOWN


class ExistenceCache:
    """Memo of registry answers keyed by ``scheme:value``, persisted as CSV."""

    def __init__(self, path: Optional[os.PathLike] = None):
        self.path = Path(path) if path is not None else None
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, newline="", encoding="utf-8") as fh:
                for row in csv.reader(fh):
                    if len(row) == 2 and row[0] != "id":
                        self._data[row[0]] = row[1]

    def get(self, key: str) -> Optional[str]:
        return self._data.get(key)

    def put(self, key: str, status: str) -> None:
        with self._lock:
            self._data.setdefault(key, status)

    def __len__(self) -> int:
        return len(self._data)

    def save(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "status"])
            for key in sorted(self._data):
                writer.writerow([key, self._data[key]])
        os.replace(tmp, self.path)


def verify_existence(scheme: str, value: str, client, cache: Optional[ExistenceCache] = None) -> str:
    """Ask ``client`` whether a DOI/ORCID is registered.

    Only ``unknown`` answers from an offline client are left uncached, so a
    later live run can still fill them in.
    """
    if scheme not in VERIFIABLE_SCHEMES or client is None:
        return UNKNOWN
    key = f"{scheme}:{value}"
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    try:
        status = client.lookup(scheme, value)
    except Exception as exc:
        logger.warning("resolver error for %s: %s", key, exc)
        status = UNKNOWN
    if status not in (VERIFIED, NOT_FOUND, UNKNOWN):
        status = UNKNOWN
    if cache is not None and status != UNKNOWN:
        cache.put(key, status)
    return status


def screen_ids(ids: Iterable[ExternalId], client=None, cache: Optional[ExistenceCache] = None,
               report: Optional[Callable[[str], None]] = None) -> list[ExternalId]:
    """Drop syntactically invalid and nonexistent ids; annotate the rest.

    ``report`` receives one message per dropped id.
    """
    kept = []
    for ext in ids:
        if not ext.syntax_valid:
            if report:
                report(f"dropped {ext}: invalid {ext.scheme} syntax")
            continue
        status = verify_existence(ext.scheme, ext.value, client, cache)
        if status == NOT_FOUND:
            if report:
                report(f"dropped {ext}: not registered")
            continue
        kept.append(ext.with_existence(status))
    return kept
