"""Ant-trail traffic simulation and cumulative-counting analysis."""
