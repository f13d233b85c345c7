"""
Tests for tar indexing and fixtures
"""
