"""Figures from banded-Cholesky benchmark CSVs."""

from .plotting import (PlotError, PlotSpec, Series, SeriesPoint, build_figure,
                       collect_series, parse_records, plot_gflops)

__version__ = "0.1.0"

__all__ = ["PlotError", "PlotSpec", "Series", "SeriesPoint", "build_figure",
           "collect_series", "parse_records", "plot_gflops"]
