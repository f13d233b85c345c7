"""
Tests for the command line and pipeline files
"""
