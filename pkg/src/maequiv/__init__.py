"""Exact symbolic workbench for the equivalence problem of elliptic Monge-Ampere systems."""

from maequiv.symkernel import GaussianRational, ScalarExpr, parse_expr, sym

__all__ = ["GaussianRational", "ScalarExpr", "parse_expr", "sym"]

__version__ = "0.1.0"
