"""HALTONMASK.CLI

Configuration, file formats and click commands of the haltonmask command line.

"""
