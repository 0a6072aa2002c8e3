"""Line-oriented dataset files for token examples, plus the corpus builder.

Record grammar (one example per line, fields separated by single spaces):

    <mode> <bars> <nstreams> <stream> { "|" <stream> }

where <stream> is a run-length token list: each item is either "V" or
"V*N" for N consecutive copies of V. Stream order for trios is melody,
bass, drums. A sibling "<name>.manifest.json" records corpus statistics.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .codec import DRUM_VOCAB, MELODY_VOCAB, DrumClassMap
from .midi.quantize import quantize
from .midi.smf import MidiParseError, parse_midi
from .midi.windows import MODES, Deduper, Example, extract_windows
from .sequences import DRUMS, STEPS_PER_BAR

_RLE_ITEM = re.compile(r"^(\d+)(?:\*(\d+))?$")


def _encode_stream(tokens: np.ndarray) -> str:
    parts = []
    values = tokens.tolist()
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[j] == values[i]:
            j += 1
        parts.append(str(values[i]) if j - i == 1 else f"{values[i]}*{j - i}")
        i = j
    return " ".join(parts)


def _decode_stream(text: str, expected_len: int, vocab: int) -> np.ndarray:
    out = []
    for item in text.split():
        m = _RLE_ITEM.match(item)
        if not m:
            raise ValueError(f"bad run-length item {item!r}")
        value = int(m.group(1))
        count = int(m.group(2)) if m.group(2) else 1
        if value >= vocab:
            raise ValueError(f"token {value} outside vocabulary of {vocab}")
        out.extend([value] * count)
    if len(out) != expected_len:
        raise ValueError(f"stream has {len(out)} tokens, expected {expected_len}")
    return np.array(out, dtype=np.int64)


def example_to_line(example: Example) -> str:
    bars = example.num_bars
    streams = " | ".join(_encode_stream(s) for s in example.streams)
    return f"{example.mode} {bars} {len(example.streams)} {streams}"


def line_to_example(line: str) -> Example:
    head = line.split(" ", 3)
    if len(head) != 4:
        raise ValueError("record needs mode, bars, stream count and tokens")
    mode, bars_text, nstreams_text, rest = head
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    bars, kinds = MODES[mode]
    if int(bars_text) != bars:
        raise ValueError(f"mode {mode} implies {bars} bars, record says {bars_text}")
    if int(nstreams_text) != len(kinds):
        raise ValueError(f"mode {mode} implies {len(kinds)} streams")
    chunks = rest.split("|")
    if len(chunks) != len(kinds):
        raise ValueError(f"found {len(chunks)} streams, expected {len(kinds)}")
    streams = []
    for kind, chunk in zip(kinds, chunks):
        vocab = DRUM_VOCAB if kind == DRUMS else MELODY_VOCAB
        streams.append(_decode_stream(chunk, bars * STEPS_PER_BAR, vocab))
    return Example(mode, tuple(streams))


def save_examples(path: str | Path, examples: list[Example], manifest: dict | None = None) -> None:
    path = Path(path)
    with open(path, "w") as f:
        for example in examples:
            f.write(example_to_line(example) + "\n")
    if manifest is not None:
        with open(path.with_suffix(path.suffix + ".manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")


def load_examples(path: str | Path) -> list[Example]:
    examples = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                examples.append(line_to_example(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return examples


def stack_examples(examples: list[Example]) -> list[np.ndarray]:
    """Stack N same-mode examples into per-stream (N, T) arrays."""
    if not examples:
        raise ValueError("no examples to stack")
    mode = examples[0].mode
    if any(e.mode != mode for e in examples):
        raise ValueError("examples mix modes")
    nstreams = len(examples[0].streams)
    return [
        np.stack([e.streams[s] for e in examples]).astype(np.int64)
        for s in range(nstreams)
    ]


def ingest_corpus(
    midi_paths: list[str | Path],
    mode: str,
    class_map: DrumClassMap | None = None,
) -> tuple[list[Example], dict]:
    """Parse, quantize and window a batch of MIDI files with corpus-wide dedup."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}")
    if class_map is None:
        class_map = DrumClassMap.default()
    deduper = Deduper()
    examples: list[Example] = []
    manifest = {
        "mode": mode,
        "files": 0,
        "parse_errors": 0,
        "rejected_songs": 0,
        "rejection_reasons": {},
        "songs_with_warnings": 0,
        "examples": 0,
        "duplicates_dropped": 0,
    }
    for path in midi_paths:
        manifest["files"] += 1
        try:
            song = parse_midi(Path(path).read_bytes())
        except MidiParseError:
            manifest["parse_errors"] += 1
            continue
        if song.warnings:
            manifest["songs_with_warnings"] += 1
        result = quantize(song)
        if result.rejected:
            manifest["rejected_songs"] += 1
            reasons = manifest["rejection_reasons"]
            reasons[result.reason] = reasons.get(result.reason, 0) + 1
            continue
        examples.extend(
            extract_windows(list(result.streams), mode, class_map=class_map, deduper=deduper)
        )
    manifest["examples"] = len(examples)
    manifest["duplicates_dropped"] = deduper.duplicates
    return examples, manifest
