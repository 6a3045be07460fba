"""Figure-style rendering of experiment CSV artifacts."""

__version__ = "0.1.0"

from .render import PlotJob, PlotKind, RenderResult, SchemaError, YScale, render

__all__ = [
    "PlotJob",
    "PlotKind",
    "RenderResult",
    "SchemaError",
    "YScale",
    "render",
    "__version__",
]
