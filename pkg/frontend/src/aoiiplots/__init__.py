"""Paper-style figure rendering from push-pull simulation results CSVs."""

from .render import (
    FAMILIES,
    Constraint,
    FigureSpec,
    RenderError,
    build_figure,
    load_rows,
    render,
    scheme_label,
)

__all__ = [
    "FAMILIES",
    "Constraint",
    "FigureSpec",
    "RenderError",
    "build_figure",
    "load_rows",
    "render",
    "scheme_label",
]

__version__ = "1.0.0"
