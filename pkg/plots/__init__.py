"""Semilog convergence-figure rendering from harness CSV histories."""

from .render import FigureSpec, load_figure_spec, render_convergence_figure

__all__ = ["FigureSpec", "load_figure_spec", "render_convergence_figure"]
