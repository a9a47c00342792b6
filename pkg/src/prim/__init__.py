"""Typed POI relationship inference with a spatially enriched relational GNN."""

__version__ = "0.1.0"
