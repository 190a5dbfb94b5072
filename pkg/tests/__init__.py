"""
cql-switch - Test Suite

Unit and integration tests for parameters, vector fields, the three stages and the pipeline.
"""
