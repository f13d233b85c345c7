"""
Engine Module

Executes dataset stages: hybrid ETL, filter/mutate/order/limit/union, UDF signal
enrichment and incremental application over deltas.
"""
