"""
Tests for schemas, column files and manifests
"""
