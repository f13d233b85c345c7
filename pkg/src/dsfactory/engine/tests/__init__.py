"""
Tests for ETL, dataset stages and UDF execution
"""
