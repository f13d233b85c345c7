"""
Tests for export manifests and the sample loader
"""
