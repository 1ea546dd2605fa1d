"""Render varivery experiment CSVs into figures.

Consumes only the documented CSV file formats emitted by the `varivery`
CLI; no linkage to its internals.
"""

__version__ = "0.1.0"
