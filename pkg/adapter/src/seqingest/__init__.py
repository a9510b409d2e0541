"""Convert saved model outputs into the tracking engine's sequence format."""

from .convert import AdapterConfig, ConvertStats, convert
from .export import export
from .formats import IngestError
from .validate import ValidationReport, validate

__version__ = "0.1.0"
