"""Event-token vocabulary and piece <-> token-sequence codecs.

A piece becomes a flat id sequence: ``BOS``, then per bar a ``Bar`` marker,
its time signature, tempo changes, and one ``Position, Instrument, Pitch,
Velocity, Duration`` group per note, closed by ``EOS``.  Velocity and tempo
use fixed uniform bins so the mapping is corpus-independent; note density and
tension use corpus quantile buckets (:class:`BucketEdges`) and appear only as
conditioning tokens, never in generated output.

Decoding is exact on quantized pieces: ``decode(encode(piece)) == piece``
once velocities and tempi sit on bin representatives and onsets on the
position grid (see :func:`quantize_piece`).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Sequence

import numpy as np

from .music import Bar, Note, Piece, TimeSignature, segment_into_bars

TOKEN_KINDS = (
    "BOS",
    "EOS",
    "Bar",
    "TimeSig",
    "Position",
    "Instrument",
    "Pitch",
    "Velocity",
    "Duration",
    "Tempo",
    "Density",
    "Tension",
)

TEMPO_BPM_MIN = 24.0
TEMPO_BPM_MAX = 224.0


class TokenDecodeError(ValueError):
    """Raised in strict mode when an id sequence is not well formed."""


@dataclass(frozen=True)
class TokenizerConfig:
    """Grid resolution and bin counts shared by encoder, decoder, and models."""

    positions_per_quarter: int = 4
    max_duration_steps: int = 64
    velocity_bins: int = 32
    tempo_bins: int = 32
    numerators: tuple[int, ...] = tuple(range(1, 17))
    denominators: tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    density_bins: int = 32
    tension_bins: int = 32

    def __post_init__(self) -> None:
        if self.positions_per_quarter < 1:
            raise ValueError("positions_per_quarter must be >= 1")
        for name in ("max_duration_steps", "velocity_bins", "tempo_bins",
                     "density_bins", "tension_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.numerators or not self.denominators:
            raise ValueError("empty time-signature table")

    @property
    def max_positions(self) -> int:
        best = 0
        for num in self.numerators:
            for den in self.denominators:
                steps = num * 4 * self.positions_per_quarter
                if steps % den == 0:
                    best = max(best, steps // den)
        return best

    def grid_ticks(self, ticks_per_quarter: int) -> int:
        if ticks_per_quarter % self.positions_per_quarter:
            raise ValueError(
                f"resolution {ticks_per_quarter} not divisible by "
                f"{self.positions_per_quarter} positions per quarter"
            )
        return ticks_per_quarter // self.positions_per_quarter

    def to_dict(self) -> dict:
        return {
            "positions_per_quarter": self.positions_per_quarter,
            "max_duration_steps": self.max_duration_steps,
            "velocity_bins": self.velocity_bins,
            "tempo_bins": self.tempo_bins,
            "numerators": list(self.numerators),
            "denominators": list(self.denominators),
            "density_bins": self.density_bins,
            "tension_bins": self.tension_bins,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TokenizerConfig:
        return cls(
            positions_per_quarter=int(data["positions_per_quarter"]),
            max_duration_steps=int(data["max_duration_steps"]),
            velocity_bins=int(data["velocity_bins"]),
            tempo_bins=int(data["tempo_bins"]),
            numerators=tuple(int(n) for n in data["numerators"]),
            denominators=tuple(int(d) for d in data["denominators"]),
            density_bins=int(data["density_bins"]),
            tension_bins=int(data["tension_bins"]),
        )


@dataclass(frozen=True)
class Token:
    """One vocabulary entry: a kind plus an optional integer or pair value."""

    kind: str
    value: int | tuple[int, int] | None = None

    def __str__(self) -> str:
        if self.value is None:
            return self.kind
        if self.kind == "TimeSig":
            num, den = self.value  # type: ignore[misc]
            return f"TimeSig_{num}/{den}"
        return f"{self.kind}_{self.value}"


def velocity_bin(velocity: int, bins: int) -> int:
    """Uniform bin index over MIDI velocities 1..127."""
    if not 1 <= velocity <= 127:
        raise ValueError(f"velocity {velocity} out of range")
    return min(bins - 1, ((velocity - 1) * bins) // 127)


def velocity_value(bin_index: int, bins: int) -> int:
    """Representative velocity at the centre of a bin."""
    if not 0 <= bin_index < bins:
        raise ValueError(f"velocity bin {bin_index} out of range")
    return 1 + round((bin_index + 0.5) * 126.0 / bins)


def tempo_bin(mpq: int, bins: int) -> int:
    """Uniform bin over beats per minute in [24, 224)."""
    if mpq <= 0:
        raise ValueError("non-positive tempo")
    bpm = 60_000_000.0 / mpq
    width = (TEMPO_BPM_MAX - TEMPO_BPM_MIN) / bins
    return int(np.clip(int((bpm - TEMPO_BPM_MIN) / width), 0, bins - 1))


def tempo_value(bin_index: int, bins: int) -> int:
    """Representative tempo (microseconds per quarter) at a bin centre."""
    if not 0 <= bin_index < bins:
        raise ValueError(f"tempo bin {bin_index} out of range")
    width = (TEMPO_BPM_MAX - TEMPO_BPM_MIN) / bins
    bpm = TEMPO_BPM_MIN + (bin_index + 0.5) * width
    return round(60_000_000.0 / bpm)


class Vocabulary:
    """Fixed token <-> id mapping derived deterministically from a config."""

    def __init__(self, config: TokenizerConfig) -> None:
        self.config = config
        tokens: list[Token] = [Token("BOS"), Token("EOS"), Token("Bar")]
        for num in config.numerators:
            for den in config.denominators:
                tokens.append(Token("TimeSig", (num, den)))
        for pos in range(config.max_positions):
            tokens.append(Token("Position", pos))
        for program in range(128):
            tokens.append(Token("Instrument", program))
        for pitch in range(128):
            tokens.append(Token("Pitch", pitch))
        for b in range(config.velocity_bins):
            tokens.append(Token("Velocity", b))
        for steps in range(1, config.max_duration_steps + 1):
            tokens.append(Token("Duration", steps))
        for b in range(config.tempo_bins):
            tokens.append(Token("Tempo", b))
        for b in range(config.density_bins):
            tokens.append(Token("Density", b))
        for b in range(config.tension_bins):
            tokens.append(Token("Tension", b))
        self._tokens = tuple(tokens)
        self._ids = {token: i for i, token in enumerate(tokens)}
        self._ranges: dict[str, tuple[int, int]] = {}
        for i, token in enumerate(tokens):
            start, count = self._ranges.get(token.kind, (i, 0))
            self._ranges[token.kind] = (start, count + 1)

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    @property
    def bar_id(self) -> int:
        return 2

    def id_of(self, token: Token) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise KeyError(f"token {token} not in vocabulary") from None

    def token_of(self, token_id: int) -> Token:
        if not 0 <= token_id < len(self._tokens):
            raise KeyError(f"id {token_id} not in vocabulary")
        return self._tokens[token_id]

    def kind_of(self, token_id: int) -> str:
        return self.token_of(token_id).kind

    def kind_range(self, kind: str) -> tuple[int, int]:
        """(first id, count) of a token kind."""
        return self._ranges[kind]

    def ids_of_kind(self, kind: str) -> range:
        start, count = self._ranges[kind]
        return range(start, start + count)


@dataclass(frozen=True)
class BucketEdges:
    """Quantile bucket boundaries: bucket i covers (edges[i-1], edges[i]]."""

    edges: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(b < a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be non-decreasing")

    @property
    def bins(self) -> int:
        return len(self.edges) + 1

    def bucket_of(self, value: float) -> int:
        return int(np.searchsorted(np.asarray(self.edges), value, side="left"))


def build_bucket_edges(values: Sequence[float], bins: int) -> BucketEdges:
    """Quantile edges splitting ``values`` into ``bins`` equal-mass buckets."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot build bucket edges from no values")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    qs = [(i + 1) / bins for i in range(bins - 1)]
    edges = np.quantile(arr, qs) if qs else np.asarray([])
    return BucketEdges(tuple(float(e) for e in edges))


@dataclass(frozen=True)
class ControlTokens:
    """Per-bar conditioning: meter, instrumentation, density and tension bins."""

    time_signature: tuple[int, int]
    instruments: tuple[int, ...]
    density_bin: int
    tension_bin: int

    def token_ids(self, vocab: Vocabulary) -> list[int]:
        ids = [vocab.id_of(Token("TimeSig", self.time_signature))]
        for program in self.instruments:
            ids.append(vocab.id_of(Token("Instrument", program)))
        ids.append(vocab.id_of(Token("Density", self.density_bin)))
        ids.append(vocab.id_of(Token("Tension", self.tension_bin)))
        return ids


def control_tokens_for_bar(
    bar: Bar,
    bar_tension: float,
    density_edges: BucketEdges,
    tension_edges: BucketEdges,
    exclude_tracks: frozenset[int] = frozenset(),
) -> ControlTokens:
    notes = [n for n in bar.notes if n.track not in exclude_tracks]
    sig = bar.time_signature
    return ControlTokens(
        time_signature=(sig.numerator, sig.denominator),
        instruments=tuple(sorted({n.instrument for n in notes})),
        density_bin=density_edges.bucket_of(float(len(notes))),
        tension_bin=tension_edges.bucket_of(float(bar_tension)),
    )


def control_tokens_for_piece(
    piece: Piece,
    bar_tensions: Sequence[float],
    density_edges: BucketEdges,
    tension_edges: BucketEdges,
) -> tuple[ControlTokens, ...]:
    if len(bar_tensions) != piece.bar_count:
        raise ValueError("one tension value per bar required")
    return tuple(
        control_tokens_for_bar(
            bar, bar_tensions[i], density_edges, tension_edges, piece.percussion_tracks
        )
        for i, bar in enumerate(piece.bars)
    )


# ----------------------------------------------------------------------------
# quantization
# ----------------------------------------------------------------------------


def quantize_piece(piece: Piece, config: TokenizerConfig) -> Piece:
    """Normalize a piece onto the tokenizer's exactly representable subset.

    Onsets and durations snap to the position grid, velocities and tempi move
    to bin representatives, tempo changes shift to bar starts, percussion is
    dropped, and track numbers become the rank of each note's program.  The
    result round-trips through encode/decode unchanged.
    """
    ppq = config.positions_per_quarter
    factor = ppq // gcd(piece.ticks_per_quarter, ppq)
    tpq = piece.ticks_per_quarter * factor
    grid = tpq // ppq

    def snap(tick: int) -> int:
        tick *= factor
        return ((tick + grid // 2) // grid) * grid

    sig_events: list[tuple[int, TimeSignature]] = []
    for bar in piece.bars:
        sig = bar.time_signature
        if sig.numerator not in config.numerators or sig.denominator not in config.denominators:
            raise ValueError(f"time signature {sig} not representable")
        if not sig_events or sig_events[-1][1] != sig:
            sig_events.append((snap(bar.start_tick), sig))
    if not sig_events:
        sig_events.append((0, TimeSignature(4, 4)))

    programs = sorted(
        {n.instrument for n in piece.notes if n.track not in piece.percussion_tracks}
    )
    track_of = {program: i for i, program in enumerate(programs)}

    notes: list[Note] = []
    for n in piece.notes:
        if n.track in piece.percussion_tracks:
            continue
        onset = snap(n.onset)
        offset = snap(n.offset)
        steps = max(1, min(config.max_duration_steps, (offset - onset) // grid))
        vel = velocity_value(velocity_bin(n.velocity, config.velocity_bins),
                             config.velocity_bins)
        notes.append(Note(onset, steps * grid, n.pitch, vel, n.instrument,
                          track_of[n.instrument]))

    bars = segment_into_bars(notes, sig_events, tpq)
    if len(bars) < piece.bar_count:  # keep trailing note-free bars
        cursor = bars[-1].end_tick if bars else 0
        index = len(bars)
        for bar in piece.bars[len(bars):]:
            span = bar.time_signature.span_ticks(tpq)
            bars.append(Bar(index, cursor, cursor + span, bar.time_signature, ()))
            cursor += span
            index += 1

    tempo_events: list[tuple[int, int]] = []
    if piece.tempo_events:
        scaled = sorted((snap(t), mpq) for t, mpq in piece.tempo_events)
        for bar in bars:
            mpq = None
            for t, value in scaled:
                if t <= bar.start_tick:
                    mpq = value
            if mpq is None:
                mpq = scaled[0][1]
            rep = tempo_value(tempo_bin(mpq, config.tempo_bins), config.tempo_bins)
            if not tempo_events or tempo_events[-1][1] != rep:
                tempo_events.append((bar.start_tick, rep))

    return Piece(
        ticks_per_quarter=tpq,
        bars=tuple(bars),
        tempo_events=tuple(tempo_events),
        key_estimate=piece.key_estimate,
        percussion_tracks=frozenset(),
    )


# ----------------------------------------------------------------------------
# encoding
# ----------------------------------------------------------------------------


def encode(piece: Piece, vocab: Vocabulary) -> list[int]:
    """Encode a quantized piece as token ids (BOS ... EOS).

    Each bar contributes its marker, time signature, any tempo change taking
    effect at its start, and the bar's notes sorted by (position, pitch,
    instrument); notes use the Position, Instrument, Pitch, Velocity,
    Duration group order.
    """
    config = vocab.config
    grid = config.grid_ticks(piece.ticks_per_quarter)
    ids = [vocab.bos_id]
    last_tempo_bin: int | None = None
    for bar in piece.bars:
        sig = bar.time_signature
        ids.append(vocab.bar_id)
        ids.append(vocab.id_of(Token("TimeSig", (sig.numerator, sig.denominator))))
        if piece.tempo_events:
            mpq = None
            for t, value in piece.tempo_events:
                if t <= bar.start_tick:
                    mpq = value
            if mpq is None:
                mpq = piece.tempo_events[0][1]
            b = tempo_bin(mpq, config.tempo_bins)
            if b != last_tempo_bin:
                ids.append(vocab.id_of(Token("Tempo", b)))
                last_tempo_bin = b
        span_steps = bar.span // grid
        for note in sorted(bar.notes,
                           key=lambda n: ((n.onset - bar.start_tick) // grid,
                                          n.pitch, n.instrument)):
            if note.track in piece.percussion_tracks:
                continue
            position = (note.onset - bar.start_tick) // grid
            if note.onset % grid or position >= span_steps:
                raise ValueError("piece is not aligned to the position grid; "
                                 "quantize it first")
            steps = note.duration // grid
            if note.duration % grid or not 1 <= steps <= config.max_duration_steps:
                raise ValueError(f"duration {note.duration} ticks not encodable")
            ids.append(vocab.id_of(Token("Position", position)))
            ids.append(vocab.id_of(Token("Instrument", note.instrument)))
            ids.append(vocab.id_of(Token("Pitch", note.pitch)))
            ids.append(vocab.id_of(Token("Velocity",
                                         velocity_bin(note.velocity,
                                                      config.velocity_bins))))
            ids.append(vocab.id_of(Token("Duration", steps)))
    ids.append(vocab.eos_id)
    return ids


def bar_boundaries(ids: Sequence[int], vocab: Vocabulary) -> list[tuple[int, int]]:
    """Half-open index spans of each bar in a token sequence."""
    starts = [i for i, t in enumerate(ids) if t == vocab.bar_id]
    spans = []
    for j, start in enumerate(starts):
        end = starts[j + 1] if j + 1 < len(starts) else len(ids)
        if ids and ids[end - 1] == vocab.eos_id and end == len(ids):
            end -= 1
        spans.append((start, end))
    return spans


# ----------------------------------------------------------------------------
# decoding
# ----------------------------------------------------------------------------


def decode(
    ids: Sequence[int],
    vocab: Vocabulary,
    ticks_per_quarter: int = 480,
    *,
    strict: bool = True,
    warnings_out: list[str] | None = None,
) -> Piece:
    """Rebuild a piece from token ids.

    In strict mode any structural violation raises :class:`TokenDecodeError`.
    Otherwise malformed fragments are skipped and a description of each
    repair is appended to ``warnings_out``.  Density and tension tokens are
    conditioning metadata and are ignored wherever they appear.
    """
    config = vocab.config
    grid = config.grid_ticks(ticks_per_quarter)

    def problem(message: str) -> None:
        if strict:
            raise TokenDecodeError(message)
        if warnings_out is not None:
            warnings_out.append(message)

    # bar: [signature | None, tempo_bin | None, list[(pos, program, pitch, vel_bin, steps)]]
    bars: list[list] = []
    pending: list[int] = []  # program, pitch, velocity bin of the open note group
    position: int | None = None
    seen_eos = False

    for index, token_id in enumerate(ids):
        try:
            token = vocab.token_of(token_id)
        except KeyError:
            problem(f"unknown id {token_id} at {index}")
            continue
        if seen_eos:
            problem(f"token {token} after EOS at {index}")
            break
        kind = token.kind
        if kind == "BOS":
            if index != 0:
                problem(f"BOS at non-initial index {index}")
            continue
        if kind == "EOS":
            seen_eos = True
            if pending:
                problem("incomplete note group at EOS")
                pending.clear()
            continue
        if kind in ("Density", "Tension"):
            continue
        if index == 0:
            problem("sequence does not start with BOS")
        if kind == "Bar":
            if pending:
                problem("incomplete note group at bar boundary")
                pending.clear()
            bars.append([None, None, []])
            position = None
            continue
        if kind == "TimeSig":
            if not bars:
                problem(f"time signature before any bar at {index}")
                continue
            if bars[-1][0] is None:
                bars[-1][0] = token.value
            else:
                problem(f"duplicate time signature at {index}")
            continue
        if kind == "Tempo":
            if not bars:
                problem(f"tempo before any bar at {index}")
                continue
            if bars[-1][1] is None:
                bars[-1][1] = token.value
            else:
                problem(f"duplicate tempo at {index}")
            continue
        if not bars:
            problem(f"{kind} token before any bar at {index}")
            continue
        if kind == "Position":
            if pending:
                problem(f"incomplete note group before position at {index}")
                pending.clear()
            position = token.value  # type: ignore[assignment]
            continue
        expected = ("Instrument", "Pitch", "Velocity")[len(pending)] \
            if len(pending) < 3 else "Duration"
        if kind != expected:
            problem(f"expected {expected} at {index}, found {kind}")
            pending.clear()
            if kind != "Instrument":
                continue
        if kind == "Duration":
            if position is None:
                problem(f"note group with no position at {index}")
            else:
                program, pitch, vel_bin = pending
                bars[-1][2].append((position, program, pitch, vel_bin, token.value))
            pending.clear()
        else:
            pending.append(token.value)  # type: ignore[arg-type]

    if pending:
        problem("incomplete note group at end of sequence")
    if not seen_eos:
        problem("sequence does not end with EOS")

    # assemble the piece
    built_bars: list[tuple[int, int, int, TimeSignature]] = []
    tempo_events: list[tuple[int, int]] = []
    raw_notes: list[tuple[int, int, int, int, int]] = []  # onset, dur, pitch, vel, program
    cursor = 0
    previous_sig = TimeSignature(4, 4)
    for bar_index, (sig_value, tempo_bin_value, groups) in enumerate(bars):
        if sig_value is None:
            problem(f"bar {bar_index} has no time signature")
            sig = previous_sig
        else:
            sig = TimeSignature(*sig_value)
        previous_sig = sig
        span = sig.span_ticks(ticks_per_quarter)
        span_steps = span // grid
        if tempo_bin_value is not None:
            mpq = tempo_value(tempo_bin_value, config.tempo_bins)
            if not tempo_events or tempo_events[-1][1] != mpq:
                tempo_events.append((cursor, mpq))
        kept = []
        for pos, program, pitch, vel_bin, steps in groups:
            if pos >= span_steps:
                problem(f"position {pos} outside bar {bar_index} of {span_steps} steps")
                continue
            kept.append((cursor + pos * grid, steps * grid, pitch,
                         velocity_value(vel_bin, config.velocity_bins), program))
        raw_notes.extend(kept)
        built_bars.append((bar_index, cursor, cursor + span, sig))
        cursor += span

    programs = sorted({n[4] for n in raw_notes})
    track_of = {program: i for i, program in enumerate(programs)}
    notes = [Note(onset, dur, pitch, vel, program, track_of[program])
             for onset, dur, pitch, vel, program in raw_notes]
    notes.sort()
    final_bars: list[Bar] = []
    for bar_index, start, end, sig in built_bars:
        bar_notes = tuple(n for n in notes if start <= n.onset < end)
        final_bars.append(Bar(bar_index, start, end, sig, bar_notes))
    return Piece(
        ticks_per_quarter=ticks_per_quarter,
        bars=tuple(final_bars),
        tempo_events=tuple(tempo_events),
        percussion_tracks=frozenset(),
    )
