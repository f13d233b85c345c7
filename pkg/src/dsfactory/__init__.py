"""
Dataset Factory - versioned metadata tables over archive-resident vision datasets
"""

__version__ = "0.1.0"
