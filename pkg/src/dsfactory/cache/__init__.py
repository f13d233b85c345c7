"""
Cache Module

Local and shared on-disk caching of sample payloads fetched from storage.
"""

from dsfactory.cache.cache import CacheConfig, CacheStats, SampleCache, entry_path

__all__ = ["CacheConfig", "CacheStats", "SampleCache", "entry_path"]
