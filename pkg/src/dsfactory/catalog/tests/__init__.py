"""
Tests for the dataset catalog
"""
