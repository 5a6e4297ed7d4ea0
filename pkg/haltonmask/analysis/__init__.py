"""HALTONMASK.ANALYSIS

Spatial and uniformity diagnostics, and the iterative unmasking loop.

"""
