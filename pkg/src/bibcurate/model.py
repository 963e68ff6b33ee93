"""Curated, row-shaped view of a bibliographic resource and its satellites."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ids import ExternalId
from .normalize import NormalizedDate
from .omid import OMID

AUTHOR = "author"
EDITOR = "editor"
PUBLISHER = "publisher"
ROLE_KINDS = (AUTHOR, EDITOR, PUBLISHER)

VOLUME_TYPE = "journal volume"
ISSUE_TYPE = "journal issue"


@dataclass
class Agent:
    """A person (family/given) or an organisation (name)."""

    family: str = ""
    given: str = ""
    name: str = ""
    ids: list[ExternalId] = field(default_factory=list)
    omid: Optional[OMID] = None

    @property
    def is_organization(self) -> bool:
        return bool(self.name) and not (self.family or self.given)

    def name_key(self) -> tuple[str, str, str]:
        return (self.family.casefold(), self.given.casefold(), self.name.casefold())

    def display_name(self) -> str:
        if self.is_organization:
            return self.name
        if self.family and self.given:
            return f"{self.family}, {self.given}"
        if self.family:
            return self.family
        return f", {self.given}" if self.given else self.name


@dataclass
class AgentRole:
    role: str
    agent: Agent
    omid: Optional[OMID] = None


@dataclass
class Pages:
    start: str
    end: str
    omid: Optional[OMID] = None


@dataclass
class CuratedEntity:
    """A bibliographic resource with everything a curated CSV row shows.

    ``container`` points one level up the issue -> volume -> venue chain.
    Volumes and issues carry their number in ``sequence``.
    """

    omid: Optional[OMID] = None
    ids: list[ExternalId] = field(default_factory=list)
    title: str = ""
    date: Optional[NormalizedDate] = None
    type: str = ""
    sequence: str = ""
    authors: list[AgentRole] = field(default_factory=list)
    editors: list[AgentRole] = field(default_factory=list)
    publishers: list[AgentRole] = field(default_factory=list)
    pages: Optional[Pages] = None
    container: Optional["CuratedEntity"] = None

    def roles(self, kind: str) -> list[AgentRole]:
        return {AUTHOR: self.authors, EDITOR: self.editors, PUBLISHER: self.publishers}[kind]

    def set_roles(self, kind: str, roles: list[AgentRole]) -> None:
        setattr(self, {AUTHOR: "authors", EDITOR: "editors", PUBLISHER: "publishers"}[kind], roles)

    def chain(self) -> tuple[Optional["CuratedEntity"], Optional["CuratedEntity"], Optional["CuratedEntity"]]:
        """(issue, volume, venue) above this resource, each possibly None."""
        issue = volume = venue = None
        node = self.container
        while node is not None:
            if node.type == ISSUE_TYPE and issue is None and volume is None and venue is None:
                issue = node
            elif node.type == VOLUME_TYPE and volume is None and venue is None:
                volume = node
            else:
                venue = node
                break
            node = node.container
        return issue, volume, venue


@dataclass(frozen=True)
class Diagnostic:
    """One reportable problem: where it happened and what was done about it."""

    row: Optional[int]
    field: str
    message: str
    branch: str = ""

    def __str__(self) -> str:
        where = "-" if self.row is None else str(self.row)
        parts = [where, self.field, self.branch, self.message]
        return "\t".join(parts)
