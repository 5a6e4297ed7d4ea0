__author__ = "haltonmask developers"

__maintainer__ = "haltonmask developers"
__email__ = "haltonmask@users.noreply.github.com"

__license__ = "MIT"
