"""
Tests for byte-range storage access
"""
