"""Synthetic satellite/HAPS CDMA and 5G NR PRS waveform toolkit."""

from .dsp import SignalBuffer
from .prn import SpreadingCode, generate_ca_code
from .channel import ChannelSet, ChannelSpec, PathSeries, SourceChannel
from .receiver import AcquisitionResult, TrackingTrace

__all__ = [
    "SignalBuffer", "SpreadingCode", "generate_ca_code",
    "ChannelSet", "ChannelSpec", "PathSeries", "SourceChannel",
    "AcquisitionResult", "TrackingTrace",
]

__version__ = "0.1.0"
