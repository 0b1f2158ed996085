"""graphflex: incremental graph structure learning with community-restricted
candidate search.

Submodules are imported explicitly (``from graphflex import pipeline``) so
the CLI can configure threading before numpy loads.
"""

__version__ = "0.1.0"
