"""
Tests for the sample cache
"""
