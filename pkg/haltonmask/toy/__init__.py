"""HALTONMASK.TOY

A distance-decaying categorical Markov random field with exact oracles, and
the information-theoretic quantities computed on it.

"""
