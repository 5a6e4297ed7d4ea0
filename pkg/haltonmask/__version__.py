#
# Package version
# see https://peps.python.org/pep-0440/
#
# __version__ = X.Y.Z*[rcN][.postN]
#
# pre-release:      X.Y.ZrcN
# release:          X.Y.Z
# release fixes:    X.Y.Z.postN
#
__version__ = "0.1.0"
