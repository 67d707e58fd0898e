"""Standard MIDI file reading and writing for the analysis pipeline.

Supports format 0 and 1 files with tick-based division.  Parsing pairs
note-on/note-off events (a note-on with velocity 0 is a note-off), merges
overlapping same-pitch notes on one channel, closes unmatched note-ons at
track end with a warning, and quantizes everything to a sixteenth-note grid.
Channel 10 percussion is kept but routed to synthetic track indices listed in
``Piece.percussion_tracks`` so harmonic analysis can skip it.

Writing emits a format-1 file: track 0 carries tempo and time-signature meta
events, followed by one track per instrument program.  Output bytes are a
deterministic function of the piece.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from math import gcd

from .music import Bar, Note, Piece, TimeSignature, segment_into_bars

log = logging.getLogger(__name__)

DEFAULT_TEMPO_MPQ = 500_000  # 120 bpm
PERCUSSION_CHANNEL = 9


class MidiParseError(ValueError):
    """Raised for structurally invalid MIDI data."""


@dataclass(frozen=True)
class RawMidiEvent:
    """A decoded track event at an absolute tick."""

    tick: int
    track: int
    status: int
    data: tuple[int, ...]
    meta_type: int | None = None
    meta_data: bytes = b""


def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes")


def _encode_varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


_DATA_BYTES = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def parse_events(data: bytes) -> tuple[int, int, list[list[RawMidiEvent]]]:
    """Decode header and per-track event lists: (format, ticks_per_quarter, tracks)."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header")
    header_len, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if header_len != 6:
        raise MidiParseError(f"unexpected MThd length {header_len}")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported MIDI format {fmt}")
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported")
    if division == 0:
        raise MidiParseError("zero ticks per quarter")

    tracks: list[list[RawMidiEvent]] = []
    pos = 14
    for track_index in range(ntrks):
        if pos + 8 > len(data):
            raise MidiParseError(f"truncated track header for track {track_index}")
        if data[pos : pos + 4] != b"MTrk":
            raise MidiParseError(f"missing MTrk chunk for track {track_index}")
        (length,) = struct.unpack(">I", data[pos + 4 : pos + 8])
        start = pos + 8
        end = start + length
        if end > len(data):
            raise MidiParseError(f"truncated track data for track {track_index}")
        tracks.append(_parse_track(data[start:end], track_index))
        pos = end
    return fmt, division, tracks


def _parse_track(chunk: bytes, track_index: int) -> list[RawMidiEvent]:
    events: list[RawMidiEvent] = []
    tick = 0
    pos = 0
    running: int | None = None
    while pos < len(chunk):
        delta, pos = _read_varlen(chunk, pos)
        tick += delta
        if pos >= len(chunk):
            raise MidiParseError("truncated event")
        byte = chunk[pos]
        if byte == 0xFF:
            meta_type = chunk[pos + 1]
            length, data_pos = _read_varlen(chunk, pos + 2)
            meta = chunk[data_pos : data_pos + length]
            if len(meta) != length:
                raise MidiParseError("truncated meta event")
            events.append(RawMidiEvent(tick, track_index, 0xFF, (), meta_type, bytes(meta)))
            pos = data_pos + length
            if meta_type == 0x2F:
                break
        elif byte in (0xF0, 0xF7):
            length, data_pos = _read_varlen(chunk, pos + 1)
            pos = data_pos + length
            if pos > len(chunk):
                raise MidiParseError("truncated sysex event")
            running = None
        else:
            if byte & 0x80:
                status = byte
                pos += 1
                running = status
            else:
                if running is None:
                    raise MidiParseError("data byte with no running status")
                status = running
            kind = status >> 4
            if kind not in _DATA_BYTES:
                raise MidiParseError(f"unexpected status byte 0x{status:02x}")
            n = _DATA_BYTES[kind]
            payload = chunk[pos : pos + n]
            if len(payload) != n:
                raise MidiParseError("truncated channel event")
            if any(b & 0x80 for b in payload):
                raise MidiParseError("data byte with high bit set")
            events.append(RawMidiEvent(tick, track_index, status, tuple(payload)))
            pos += n
    return events


def _snap(tick: int, grid: int) -> int:
    return ((tick + grid // 2) // grid) * grid


def parse_midi(data: bytes, positions_per_quarter: int = 4) -> Piece:
    """Parse MIDI bytes into a Piece quantized to the given grid.

    The grid has ``positions_per_quarter`` positions per quarter note (4 means
    sixteenth notes).  Files whose resolution is not divisible by the grid are
    rescaled to the least common multiple first, so quantization stays exact.
    """
    if positions_per_quarter < 1:
        raise ValueError("positions_per_quarter must be >= 1")
    _, tpq, tracks = parse_events(data)

    factor = positions_per_quarter // gcd(tpq, positions_per_quarter)
    tpq *= factor
    grid = tpq // positions_per_quarter

    ntrks = len(tracks)
    notes: list[Note] = []
    tempo_events: list[tuple[int, int]] = []
    timesig_events: list[tuple[int, TimeSignature]] = []
    percussion_tracks: set[int] = set()
    unmatched = 0

    for track_index, events in enumerate(tracks):
        # (channel, pitch) -> [onset_tick, nesting_count, velocity, program]
        active: dict[tuple[int, int], list[int]] = {}
        programs: dict[int, int] = {}
        track_end = 0

        def close(channel: int, pitch: int, off_tick: int) -> None:
            entry = active.pop((channel, pitch))
            onset, _, velocity, program = entry
            onset_q = _snap(onset * factor, grid)
            offset_q = _snap(off_tick * factor, grid)
            duration = max(grid, offset_q - onset_q)
            if channel == PERCUSSION_CHANNEL:
                track = ntrks + track_index
                percussion_tracks.add(track)
            else:
                track = track_index
            notes.append(Note(onset_q, duration, pitch, max(1, velocity), program, track))

        for ev in events:
            track_end = max(track_end, ev.tick)
            if ev.status == 0xFF:
                if ev.meta_type == 0x51 and len(ev.meta_data) == 3:
                    mpq = int.from_bytes(ev.meta_data, "big")
                    tempo_events.append((_snap(ev.tick * factor, grid), mpq))
                elif ev.meta_type == 0x58 and len(ev.meta_data) >= 2:
                    num, dd = ev.meta_data[0], ev.meta_data[1]
                    den = 1 << dd
                    if num >= 1 and den in (1, 2, 4, 8, 16, 32):
                        timesig_events.append(
                            (_snap(ev.tick * factor, grid), TimeSignature(num, den))
                        )
                    else:
                        log.warning("ignoring unsupported time signature %d/%d", num, den)
                continue
            kind = ev.status >> 4
            channel = ev.status & 0x0F
            if kind == 0xC:
                programs[channel] = ev.data[0]
            elif kind == 0x9 and ev.data[1] > 0:
                key = (channel, ev.data[0])
                if key in active:
                    active[key][1] += 1
                else:
                    active[key] = [ev.tick, 1, ev.data[1], programs.get(channel, 0)]
            elif kind == 0x8 or (kind == 0x9 and ev.data[1] == 0):
                key = (channel, ev.data[0])
                if key in active:
                    active[key][1] -= 1
                    if active[key][1] <= 0:
                        close(channel, ev.data[0], ev.tick)

        for channel, pitch in sorted(active):
            unmatched += 1
            close(channel, pitch, max(track_end, active[(channel, pitch)][0] + 1))

    if unmatched:
        log.warning("closed %d unmatched note-on(s) at track end", unmatched)

    tempo_events.sort(key=lambda e: e[0])
    if not tempo_events or tempo_events[0][0] > 0:
        tempo_events.insert(0, (0, DEFAULT_TEMPO_MPQ))
    tempo_events = _dedupe_events(tempo_events)

    timesig_events.sort(key=lambda e: e[0])
    if not timesig_events or timesig_events[0][0] > 0:
        timesig_events.insert(0, (0, TimeSignature(4, 4)))
    timesig_events = _dedupe_events(timesig_events)

    bars = segment_into_bars(notes, timesig_events, tpq)
    return Piece(
        ticks_per_quarter=tpq,
        bars=tuple(bars),
        tempo_events=tuple(tempo_events),
        percussion_tracks=frozenset(percussion_tracks),
    )


def _dedupe_events(events: list) -> list:
    # keep the last event per tick, drop consecutive repeats of the same value
    by_tick: dict[int, object] = {}
    for tick, value in events:
        by_tick[tick] = value
    out: list = []
    for tick in sorted(by_tick):
        value = by_tick[tick]
        if out and out[-1][1] == value:
            continue
        out.append((tick, value))
    return out


def parse_midi_file(path: str, positions_per_quarter: int = 4) -> Piece:
    with open(path, "rb") as fh:
        return parse_midi(fh.read(), positions_per_quarter)


# ----------------------------------------------------------------------------
# writing
# ----------------------------------------------------------------------------


def _meta(delta: int, meta_type: int, data: bytes) -> bytes:
    return _encode_varlen(delta) + bytes((0xFF, meta_type)) + _encode_varlen(len(data)) + data


def _track_chunk(body: bytes) -> bytes:
    body += _meta(0, 0x2F, b"")
    return b"MTrk" + struct.pack(">I", len(body)) + body


def _timesig_changes(piece: Piece) -> list[tuple[int, TimeSignature]]:
    changes: list[tuple[int, TimeSignature]] = []
    for bar in piece.bars:
        if not changes or changes[-1][1] != bar.time_signature:
            changes.append((bar.start_tick, bar.time_signature))
    if not changes:
        changes.append((0, TimeSignature(4, 4)))
    return changes


def write_midi(piece: Piece) -> bytes:
    """Serialize a piece as a format-1 MIDI file.

    Track 0 holds tempo and time-signature meta events; each instrument
    program gets its own track (channels assigned in program order, skipping
    the percussion channel), and percussion notes go to a final channel-10
    track.  Re-parsing preserves every note's pitch, onset, duration,
    velocity, and instrument, except that overlapping same-pitch notes within
    one instrument merge by design.
    """
    meta_events: list[tuple[int, int, bytes]] = []  # (tick, order, payload-after-delta)
    for tick, sig in _timesig_changes(piece):
        dd = sig.denominator.bit_length() - 1
        meta_events.append((tick, 0, bytes((0xFF, 0x58, 0x04, sig.numerator, dd, 24, 8))))
    tempo_events = list(piece.tempo_events) or [(0, DEFAULT_TEMPO_MPQ)]
    for tick, mpq in tempo_events:
        meta_events.append((tick, 1, bytes((0xFF, 0x51, 0x03)) + int(mpq).to_bytes(3, "big")))
    meta_events.sort(key=lambda e: (e[0], e[1]))
    body = b""
    cursor = 0
    for tick, _, payload in meta_events:
        body += _encode_varlen(tick - cursor) + payload
        cursor = tick
    chunks = [_track_chunk(body)]

    melodic = [n for n in piece.notes if n.track not in piece.percussion_tracks]
    drums = [n for n in piece.notes if n.track in piece.percussion_tracks]
    programs = sorted({n.instrument for n in melodic})
    channels = [c for c in range(16) if c != PERCUSSION_CHANNEL]

    for idx, program in enumerate(programs):
        channel = channels[idx % len(channels)]
        chunks.append(
            _note_track(
                [n for n in melodic if n.instrument == program], channel, program
            )
        )
    if drums:
        chunks.append(_note_track(drums, PERCUSSION_CHANNEL, None))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), piece.ticks_per_quarter)
    return header + b"".join(chunks)


def _note_track(notes: list[Note], channel: int, program: int | None) -> bytes:
    events: list[tuple[int, int, int, bytes]] = []  # (tick, on_flag, pitch, bytes)
    for n in notes:
        events.append((n.onset, 1, n.pitch, bytes((0x90 | channel, n.pitch, n.velocity))))
        events.append((n.offset, 0, n.pitch, bytes((0x80 | channel, n.pitch, 0))))
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    body = b""
    if program is not None:
        body += _encode_varlen(0) + bytes((0xC0 | channel, program))
    cursor = 0
    for tick, _, _, payload in events:
        body += _encode_varlen(tick - cursor) + payload
        cursor = tick
    return _track_chunk(body)


def write_midi_file(piece: Piece, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(write_midi(piece))


# ----------------------------------------------------------------------------
# chord-track selection
# ----------------------------------------------------------------------------


def filter_chord_tracks(piece: Piece, min_polyphony_ratio: float = 0.3) -> Piece:
    """Keep only tracks that are chordal enough for harmonic analysis.

    A track is retained when the fraction of its onset instants with at least
    three simultaneously sounding notes reaches ``min_polyphony_ratio``.
    Percussion tracks are always dropped.  A ratio of 0.0 keeps every
    non-percussion track.  The returned piece preserves bar spans; if nothing
    qualifies it simply contains no notes, which callers treat as a skip
    marker.
    """
    if not 0.0 <= min_polyphony_ratio <= 1.0:
        raise ValueError("min_polyphony_ratio must be in [0, 1]")
    by_track: dict[int, list[Note]] = {}
    for note in piece.notes:
        if note.track in piece.percussion_tracks:
            continue
        by_track.setdefault(note.track, []).append(note)

    retained: set[int] = set()
    for track, notes in by_track.items():
        onsets = sorted({n.onset for n in notes})
        if not onsets:
            continue
        chordal = 0
        for t in onsets:
            sounding = sum(1 for n in notes if n.onset <= t < n.offset)
            if sounding >= 3:
                chordal += 1
        if chordal / len(onsets) >= min_polyphony_ratio:
            retained.add(track)

    bars = tuple(
        Bar(
            bar.index,
            bar.start_tick,
            bar.end_tick,
            bar.time_signature,
            tuple(n for n in bar.notes if n.track in retained),
        )
        for bar in piece.bars
    )
    return Piece(
        ticks_per_quarter=piece.ticks_per_quarter,
        bars=bars,
        tempo_events=piece.tempo_events,
        key_estimate=piece.key_estimate,
        percussion_tracks=frozenset(),
    )
