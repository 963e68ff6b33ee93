"""Curation of bibliographic metadata into a provenance-tracked RDF store."""

from .curator import Curator, RowNormalizer, decide, merge
from .ids import ExternalId, make_id, normalize_id, validate_syntax
from .omid import OMID, Minter, ResolutionIndex, validate_prefix
from .provenance import ProvenanceStore, QuadStore
from .service import LookupService, Workspace, compute_stats, parse_field_query

__all__ = [
    "Curator", "ExternalId", "LookupService", "Minter", "OMID", "ProvenanceStore", "QuadStore",
    "ResolutionIndex", "RowNormalizer", "Workspace", "compute_stats", "decide", "make_id", "merge",
    "normalize_id", "parse_field_query", "validate_prefix", "validate_syntax",
]
