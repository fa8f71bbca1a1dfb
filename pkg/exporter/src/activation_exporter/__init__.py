"""Per-layer activation export from a PyTorch host into MBFA files."""

from activation_exporter.export import ExportResult, export
from activation_exporter.manifest import ExportManifest, load_manifest

__version__ = "0.1.0"

__all__ = ["ExportManifest", "ExportResult", "export", "load_manifest"]
