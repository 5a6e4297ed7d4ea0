"""HALTONMASK.SEQUENCE

Radical inverses, the 2D Halton sequence and its discretization onto a token grid.

"""
