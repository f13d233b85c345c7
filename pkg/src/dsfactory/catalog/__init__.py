"""
Catalog Module

Immutable, named, versioned dataset registry with content-addressed
fingerprints, a provenance graph and staleness propagation.
"""

from dsfactory.catalog.fingerprint import fingerprint
from dsfactory.catalog.dataset import Dataset
from dsfactory.catalog.catalog import Catalog, VersionRef, catalog_lock, validate_name

__all__ = ["fingerprint", "Dataset", "Catalog", "VersionRef", "catalog_lock", "validate_name"]
