"""Figures from shrec run outputs; reads the CSV/NDJSON contracts only."""

from .render import FigureSpec, FigureDataError, render, FIGURE_KINDS

__version__ = "0.1.0"
