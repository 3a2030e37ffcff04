"""Data ingestion, panel serialization, pairwise pipeline, and the CLI."""

from .ingest import load_and_resample, load_ticks
from .panel_csv import panel_from_csv, panel_to_csv
from .pipeline import attach_fdr, edge_list, heatmap_matrix, scan_pairs

__all__ = [
    "load_and_resample",
    "load_ticks",
    "panel_from_csv",
    "panel_to_csv",
    "attach_fdr",
    "edge_list",
    "heatmap_matrix",
    "scan_pairs",
]
