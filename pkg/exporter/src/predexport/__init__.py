"""Thin adapter exporting in-memory predictions to prediction containers."""

__version__ = "0.1.0"

from .export import (
    CatalogSpec,
    ExportError,
    ExportRequest,
    InstanceRecord,
    export_predictions,
    mask_to_runs,
)

__all__ = [
    "CatalogSpec",
    "ExportError",
    "ExportRequest",
    "InstanceRecord",
    "export_predictions",
    "mask_to_runs",
]
