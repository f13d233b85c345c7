"""
Content-addressed dataset fingerprints.
"""

from dsfactory.utils import canonical_json, sha256_hex


def fingerprint_document(parents, descriptor, schema):
    return {
        "descriptor": descriptor.canonical(),
        "parents": sorted(parents),
        "schema": schema.canonical(),
    }


def fingerprint(parents, descriptor, schema):
    """
    Fingerprint a dataset version.

    SHA-256 of the canonical JSON document {parents, descriptor, schema}, with
    parent fingerprints sorted.

    Args:
        parents (list[str]): Parent fingerprints
        descriptor (OperationDescriptor): Operation that produced the dataset
        schema (Schema): Output schema

    Returns:
        str: Lowercase hex digest
    """
    return sha256_hex(canonical_json(fingerprint_document(parents, descriptor, schema), allow_floats=False))
