"""
CLI Module

The `df` command line and pipeline files.
"""
