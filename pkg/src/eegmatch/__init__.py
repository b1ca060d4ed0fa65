"""EEG-speech match/mismatch decoding pipeline."""

from .tensors import TimeSeriesTensor, read_tensor, read_timeseries, write_tensor, write_timeseries

__all__ = [
    "TimeSeriesTensor",
    "read_tensor",
    "read_timeseries",
    "write_tensor",
    "write_timeseries",
]

__version__ = "0.1.0"
