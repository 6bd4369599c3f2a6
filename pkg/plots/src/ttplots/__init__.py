"""Deterministic figures from ttflow result CSVs."""

from .render import FigureSpec, read_results_csv, render

__version__ = "0.1.0"
