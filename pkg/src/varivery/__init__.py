"""Desk-scale laboratory for layered variational quantum learning models:
state-vector simulation, circuit builders, barren-plateau diagnostics,
gradient-based training, quantum-kernel fitting, and LCU-to-brickwork
compilation, with a reproducible experiment CLI."""

__version__ = "0.1.0"
