"""
Archive Module

Parses ustar tar archives into per-member (offset, length) indexes so samples
inside archives are randomly addressable without extraction.
"""

from dsfactory.archive.tar_index import TarMember, index_tar, verify_member

__all__ = ["TarMember", "index_tar", "verify_member"]
