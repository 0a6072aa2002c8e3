"""Standard MIDI File reader and a small writer.

Reads format 0 and 1 files. Only the events the pipeline needs are kept:
notes, program changes, tempo and time-signature metas. Everything else is
parsed (so the byte stream stays in sync) and discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58
META_END_OF_TRACK = 0x2F

DRUM_CHANNEL = 9


class MidiParseError(ValueError):
    """Malformed SMF input. Carries the byte offset of the failure."""

    def __init__(self, offset: int, message: str) -> None:
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


@dataclass(frozen=True)
class MidiNote:
    channel: int
    pitch: int
    velocity: int
    on_tick: int
    off_tick: int

    def __post_init__(self) -> None:
        if self.off_tick < self.on_tick:
            raise ValueError("off_tick precedes on_tick")


@dataclass(frozen=True)
class MidiSong:
    ticks_per_quarter: int
    tempo_events: tuple[tuple[int, int], ...]
    time_signatures: tuple[tuple[int, int, int], ...]
    tracks: tuple[tuple[MidiNote, ...], ...]
    program_changes: tuple[tuple[int, int, int], ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.ticks_per_quarter <= 0:
            raise ValueError("ticks_per_quarter must be positive")

    @property
    def all_notes(self) -> tuple[MidiNote, ...]:
        flat = [note for track in self.tracks for note in track]
        flat.sort(key=lambda n: (n.on_tick, n.channel, n.pitch))
        return tuple(flat)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0) -> None:
        self.data = data
        self.pos = pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError(self.pos, f"truncated while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return int.from_bytes(self.take(2, what), "big")

    def u32(self, what: str) -> int:
        return int.from_bytes(self.take(4, what), "big")

    def vlq(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8("variable-length quantity")
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiParseError(self.pos, "variable-length quantity longer than 4 bytes")


def parse_midi(data: bytes) -> MidiSong:
    """Decode an SMF byte stream into a MidiSong.

    Unknown chunk types are skipped. Dangling note-ons are closed at the
    end of their track and reported through MidiSong.warnings.
    """
    r = _Reader(data)
    if r.take(4, "header chunk id") != b"MThd":
        raise MidiParseError(0, "not a Standard MIDI File (missing MThd)")
    header_len = r.u32("header length")
    if header_len < 6:
        raise MidiParseError(r.pos - 4, f"header length {header_len} too short")
    fmt = r.u16("format")
    ntracks = r.u16("track count")
    division = r.u16("division")
    r.take(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiParseError(8, f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise MidiParseError(12, "SMPTE time division is not supported")
    if division == 0:
        raise MidiParseError(12, "division of zero ticks per quarter")
    if fmt == 0 and ntracks != 1:
        raise MidiParseError(10, f"format 0 file declares {ntracks} tracks")

    tempo_events: list[tuple[int, int]] = []
    time_signatures: list[tuple[int, int, int]] = []
    program_changes: list[tuple[int, int, int]] = []
    tracks: list[tuple[MidiNote, ...]] = []
    warnings: list[str] = []

    tracks_seen = 0
    while tracks_seen < ntracks:
        if r.pos >= len(data):
            raise MidiParseError(r.pos, f"expected {ntracks} tracks, found {tracks_seen}")
        chunk_id = r.take(4, "chunk id")
        chunk_len = r.u32("chunk length")
        chunk_start = r.pos
        r.take(chunk_len, f"chunk {chunk_id!r} body")
        if chunk_id != b"MTrk":
            continue
        tracks_seen += 1
        notes, dangling = _parse_track(
            _Reader(data, chunk_start), chunk_len,
            tempo_events, time_signatures, program_changes,
        )
        if dangling:
            warnings.append(f"track {tracks_seen}: closed {dangling} dangling note-on(s)")
        tracks.append(notes)

    tempo_events.sort()
    time_signatures.sort()
    program_changes.sort(key=lambda e: e[1])
    return MidiSong(
        ticks_per_quarter=division,
        tempo_events=tuple(tempo_events),
        time_signatures=tuple(time_signatures),
        tracks=tuple(tracks),
        program_changes=tuple(program_changes),
        warnings=tuple(warnings),
    )


def _parse_track(r, length, tempo_events, time_signatures, program_changes):
    end = r.pos + length
    tick = 0
    running_status = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    notes: list[MidiNote] = []

    def close(channel: int, pitch: int, off_tick: int) -> bool:
        queue = open_notes.get((channel, pitch))
        if not queue:
            return False
        on_tick, velocity = queue.pop(0)
        notes.append(MidiNote(channel, pitch, velocity, on_tick, off_tick))
        return True

    saw_end = False
    while r.pos < end:
        tick += r.vlq()
        status = r.u8("event status")
        if status < 0x80:
            if running_status is None:
                raise MidiParseError(r.pos - 1, "data byte with no running status")
            status = running_status
            r.pos -= 1
        if status == 0xFF:
            running_status = None
            meta_type = r.u8("meta type")
            meta_len = r.vlq()
            payload = r.take(meta_len, "meta payload")
            if meta_type == META_TEMPO:
                if meta_len != 3:
                    raise MidiParseError(r.pos - meta_len, "tempo meta must be 3 bytes")
                tempo_events.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == META_TIME_SIGNATURE:
                if meta_len < 2:
                    raise MidiParseError(r.pos - meta_len, "time signature meta too short")
                time_signatures.append((tick, payload[0], 1 << payload[1]))
            elif meta_type == META_END_OF_TRACK:
                saw_end = True
                break
            continue
        if status in (0xF0, 0xF7):
            running_status = None
            r.take(r.vlq(), "sysex payload")
            continue
        if status < 0x80 or status >= 0xF0:
            raise MidiParseError(r.pos - 1, f"unexpected status byte 0x{status:02x}")
        running_status = status
        kind = status & 0xF0
        channel = status & 0x0F
        if kind == 0x90:
            pitch = r.u8("note pitch")
            velocity = r.u8("note velocity")
            if velocity == 0:
                close(channel, pitch, tick)
            else:
                open_notes.setdefault((channel, pitch), []).append((tick, velocity))
        elif kind == 0x80:
            pitch = r.u8("note pitch")
            r.u8("release velocity")
            close(channel, pitch, tick)
        elif kind == 0xC0:
            program_changes.append((channel, tick, r.u8("program number")))
        elif kind == 0xD0:
            r.take(1, "channel pressure")
        else:
            r.take(2, "event data")

    if not saw_end:
        raise MidiParseError(r.pos, "track ended without end-of-track meta")

    dangling = 0
    for (channel, pitch), queue in sorted(open_notes.items()):
        for on_tick, velocity in queue:
            notes.append(MidiNote(channel, pitch, velocity, on_tick, tick))
            dangling += 1
    notes.sort(key=lambda n: (n.on_tick, n.channel, n.pitch))
    return tuple(notes), dangling


def _vlq_bytes(value: int) -> bytes:
    if value < 0:
        raise ValueError("cannot encode a negative delta")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_midi(song: MidiSong) -> bytes:
    """Emit a format-1 file: one meta track, then one track per note track."""
    chunks = []
    meta = bytearray()
    events = [(tick, bytes([0xFF, META_TEMPO, 3]) + tempo.to_bytes(3, "big"))
              for tick, tempo in song.tempo_events]
    for tick, num, den in song.time_signatures:
        if den & (den - 1) or den == 0:
            raise ValueError(f"time signature denominator {den} is not a power of two")
        events.append((tick, bytes([0xFF, META_TIME_SIGNATURE, 4, num, den.bit_length() - 1, 24, 8])))
    events.sort(key=lambda e: e[0])
    prev = 0
    for tick, payload in events:
        meta += _vlq_bytes(tick - prev) + payload
        prev = tick
    meta += b"\x00\xff\x2f\x00"
    chunks.append(bytes(meta))

    programs = sorted(song.program_changes, key=lambda e: e[1])
    for index, track in enumerate(song.tracks):
        body = bytearray()
        events = []
        if index == 0:
            for channel, tick, program in programs:
                events.append((tick, 0, bytes([0xC0 | channel, program])))
        for note in track:
            events.append((note.on_tick, 1, bytes([0x90 | note.channel, note.pitch, note.velocity])))
            events.append((note.off_tick, 2, bytes([0x80 | note.channel, note.pitch, 0])))
        events.sort(key=lambda e: (e[0], e[1]))
        prev = 0
        for tick, _, payload in events:
            body += _vlq_bytes(tick - prev) + payload
            prev = tick
        body += b"\x00\xff\x2f\x00"
        chunks.append(bytes(body))

    out = bytearray(b"MThd")
    out += (6).to_bytes(4, "big")
    out += (1).to_bytes(2, "big")
    out += len(chunks).to_bytes(2, "big")
    out += song.ticks_per_quarter.to_bytes(2, "big")
    for chunk in chunks:
        out += b"MTrk" + len(chunk).to_bytes(4, "big") + chunk
    return bytes(out)
