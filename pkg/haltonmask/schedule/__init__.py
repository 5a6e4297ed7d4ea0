"""HALTONMASK.SCHEDULE

Step size plans and token-unmasking schedulers.

"""
