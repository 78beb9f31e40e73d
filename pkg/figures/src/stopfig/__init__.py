"""stopfig: figure rendering for stopbound CSV outputs."""

from .render import (
    FigureError,
    FigureSpec,
    RenderResult,
    ZoomBox,
    load_spec,
    read_columns,
    render,
)

__all__ = [
    "FigureError",
    "FigureSpec",
    "RenderResult",
    "ZoomBox",
    "load_spec",
    "read_columns",
    "render",
]
__version__ = "0.1.0"
