"""Executable I/O specifications: an interpreter for a small ML-like
language with I/O, threads and prophecy variables, Petri-net trace
specifications, a runtime monitor and a bounded exhaustive explorer."""

import sys

# Substitution and printing recurse over expression trees; desugared
# recursive functions nest deeply.
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

__version__ = "0.1.0"
