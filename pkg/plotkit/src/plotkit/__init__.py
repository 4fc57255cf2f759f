"""plotkit: batch figure rendering for heterosolve experiment CSVs."""

from .render import FigureSpec, SchemaMismatch, build_panels, load_rows, render

__version__ = "0.1.0"
__all__ = ["FigureSpec", "SchemaMismatch", "build_panels", "load_rows", "render"]
