"""
coarsetk - desk-scale coarse geometry toolkit.

Finite metric spaces, covers and their scale invariants, dimension witnesses,
precode structures with their ultrametrics, and checkers for the
dimension-raising map conditions (B), (B)_n and (C)_n.
"""

__version__ = "0.3.0"
