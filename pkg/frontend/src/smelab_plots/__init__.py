"""Chart rendering for smelab Monte Carlo CSV output."""

__version__ = "0.1.0"

from .render import (
    ColumnMismatchError,
    FigureSpec,
    build_figure,
    load_rows,
    render,
    series_stats,
)
