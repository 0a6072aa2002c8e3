"""MIDI ingestion: file parsing, grid quantization, window extraction."""

from .quantize import QuantizeResult, quantize, skyline, tick_to_step
from .smf import DRUM_CHANNEL, MidiNote, MidiParseError, MidiSong, parse_midi, write_midi
from .windows import MODES, Deduper, Example, extract_windows, slice_stream

__all__ = [
    "DRUM_CHANNEL",
    "Deduper",
    "Example",
    "MODES",
    "MidiNote",
    "MidiParseError",
    "MidiSong",
    "QuantizeResult",
    "extract_windows",
    "parse_midi",
    "quantize",
    "skyline",
    "slice_stream",
    "tick_to_step",
    "write_midi",
]
