"""Core symbolic-music model: notes, bars, chord windows, keys, pieces.

Everything downstream (tension analysis, tokenization, generation) works on
these types.  Time is integer MIDI ticks; pitch classes are ints 0..11 with
0 = C.  Percussion is carried along in a :class:`Piece` but excluded from
harmonic analysis via ``Piece.percussion_tracks``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Sequence

import numpy as np

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
NATURAL_MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)

PC_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

WINDOW_POLICIES = ("beat", "half_bar", "full_bar")
CHROMA_WEIGHTINGS = ("count", "duration")


@dataclass(frozen=True)
class TimeSignature:
    """A numerator/denominator pair, e.g. TimeSignature(3, 4) for 3/4."""

    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if self.numerator < 1:
            raise ValueError(f"time signature numerator must be >= 1, got {self.numerator}")
        if self.denominator not in (1, 2, 4, 8, 16, 32):
            raise ValueError(f"unsupported time signature denominator {self.denominator}")

    def span_ticks(self, ticks_per_quarter: int) -> int:
        """Length of one bar in ticks."""
        span = 4 * ticks_per_quarter * self.numerator
        if span % self.denominator:
            raise ValueError(
                f"bar span of {self} is fractional at {ticks_per_quarter} ticks/quarter"
            )
        return span // self.denominator

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True, order=True)
class Note:
    """A single note event.  ``track`` groups notes by their source track."""

    onset: int
    duration: int
    pitch: int
    velocity: int
    instrument: int = 0
    track: int = 0

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if self.duration <= 0:
            raise ValueError(f"non-positive duration {self.duration}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0..127")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1..127")
        if not 0 <= self.instrument <= 127:
            raise ValueError(f"instrument {self.instrument} outside 0..127")

    @property
    def offset(self) -> int:
        return self.onset + self.duration

    @property
    def pitch_class(self) -> int:
        return self.pitch % 12


@dataclass(frozen=True)
class Bar:
    """A bar span plus the notes whose onsets fall inside it."""

    index: int
    start_tick: int
    end_tick: int
    time_signature: TimeSignature
    notes: tuple[Note, ...] = ()

    def __post_init__(self) -> None:
        if self.end_tick <= self.start_tick:
            raise ValueError("bar must have positive span")
        for note in self.notes:
            if not self.start_tick <= note.onset < self.end_tick:
                raise ValueError(
                    f"note onset {note.onset} outside bar span "
                    f"[{self.start_tick}, {self.end_tick})"
                )

    @property
    def span(self) -> int:
        return self.end_tick - self.start_tick

    @property
    def note_count(self) -> int:
        return len(self.notes)

    def instruments(self, exclude_tracks: frozenset[int] = frozenset()) -> tuple[int, ...]:
        """Sorted distinct instrument programs sounding in this bar."""
        return tuple(sorted({n.instrument for n in self.notes if n.track not in exclude_tracks}))


@dataclass(frozen=True)
class Key:
    """Estimated key: tonic pitch class 0..11 and mode 'major' or 'minor'."""

    tonic: int
    mode: str

    def __post_init__(self) -> None:
        if not 0 <= self.tonic <= 11:
            raise ValueError(f"tonic {self.tonic} outside 0..11")
        if self.mode not in ("major", "minor"):
            raise ValueError(f"mode must be 'major' or 'minor', got {self.mode!r}")

    def scale_pitch_classes(self) -> tuple[int, ...]:
        base = MAJOR_SCALE if self.mode == "major" else NATURAL_MINOR_SCALE
        return tuple(sorted((self.tonic + d) % 12 for d in base))

    @property
    def name(self) -> str:
        return f"{PC_NAMES[self.tonic]} {self.mode}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ChordWindow:
    """Pitches sounding within a time window, with per-pitch sounding ticks.

    ``sounding`` holds (pitch, overlap_ticks) per note occurrence, sorted.
    Windows are the unit of harmonic analysis: chroma vectors and pitch-class
    sets are derived from them.
    """

    start_tick: int
    end_tick: int
    sounding: tuple[tuple[int, int], ...]

    @property
    def pitches(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.sounding)

    def pitch_classes(self) -> tuple[int, ...]:
        """Sorted distinct pitch classes sounding in the window."""
        return tuple(sorted({p % 12 for p, _ in self.sounding}))

    @property
    def is_empty(self) -> bool:
        return not self.sounding


@dataclass(frozen=True)
class Piece:
    """A whole piece: bars, tempo map, and an optional key estimate.

    ``tempo_events`` is a tuple of (tick, microseconds_per_quarter) pairs.
    ``percussion_tracks`` marks track indices excluded from harmonic analysis.
    """

    ticks_per_quarter: int
    bars: tuple[Bar, ...] = ()
    tempo_events: tuple[tuple[int, int], ...] = ()
    key_estimate: Key | None = None
    percussion_tracks: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.ticks_per_quarter <= 0:
            raise ValueError("ticks_per_quarter must be positive")

    @property
    def notes(self) -> tuple[Note, ...]:
        return tuple(chain.from_iterable(bar.notes for bar in self.bars))

    @property
    def note_count(self) -> int:
        return sum(bar.note_count for bar in self.bars)

    @property
    def bar_count(self) -> int:
        return len(self.bars)

    def harmonic_notes(self) -> tuple[Note, ...]:
        """All notes except those on percussion tracks."""
        if not self.percussion_tracks:
            return self.notes
        return tuple(n for n in self.notes if n.track not in self.percussion_tracks)


def segment_into_bars(
    notes: Sequence[Note],
    timesig_events: Sequence[tuple[int, TimeSignature]],
    ticks_per_quarter: int,
) -> list[Bar]:
    """Partition notes into bars by onset.

    ``timesig_events`` must be sorted and start at tick 0.  A signature change
    between bar boundaries takes effect at the next boundary.  Bars extend far
    enough to cover every onset; trailing content gets a final full bar span.
    Empty input produces an empty bar list.
    """
    if ticks_per_quarter <= 0:
        raise ValueError("ticks_per_quarter must be positive")
    if not timesig_events:
        raise ValueError("at least one time signature event is required")
    events = sorted(timesig_events, key=lambda e: e[0])
    if events[0][0] != 0:
        raise ValueError(f"first time signature event must be at tick 0, got {events[0][0]}")

    ordered = sorted(notes, key=lambda n: (n.onset, n.pitch, n.track))
    if not ordered:
        return []
    last_onset = ordered[-1].onset

    bars: list[Bar] = []
    start = 0
    index = 0
    note_pos = 0
    while start <= last_onset:
        active = events[0][1]
        for tick, signature in events:
            if tick <= start:
                active = signature
            else:
                break
        end = start + active.span_ticks(ticks_per_quarter)
        in_bar: list[Note] = []
        while note_pos < len(ordered) and ordered[note_pos].onset < end:
            in_bar.append(ordered[note_pos])
            note_pos += 1
        bars.append(Bar(index, start, end, active, tuple(in_bar)))
        start = end
        index += 1
    return bars


def extract_chord_windows(
    bar: Bar,
    policy: str = "beat",
    exclude_tracks: frozenset[int] = frozenset(),
) -> list[ChordWindow]:
    """Slice a bar into chord windows under the given policy.

    Policies: 'beat' (one window per denominator beat), 'half_bar', 'full_bar'.
    A note contributes to every window its sounding span intersects; windows
    with no sounding notes are returned empty.  Windows partition the bar span
    exactly.
    """
    if policy not in WINDOW_POLICIES:
        raise ValueError(f"unknown window policy {policy!r}")
    if policy == "beat":
        count = bar.time_signature.numerator
    elif policy == "half_bar":
        count = 2
    else:
        count = 1
    span = bar.span
    boundaries = [bar.start_tick + (span * i) // count for i in range(count + 1)]

    usable = [n for n in bar.notes if n.track not in exclude_tracks]
    windows: list[ChordWindow] = []
    for w_start, w_end in zip(boundaries, boundaries[1:]):
        sounding = []
        for note in usable:
            overlap = min(note.offset, w_end) - max(note.onset, w_start)
            if overlap > 0:
                sounding.append((note.pitch, overlap))
        sounding.sort()
        windows.append(ChordWindow(w_start, w_end, tuple(sounding)))
    return windows


def chroma_of(window: ChordWindow, weighting: str = "duration") -> np.ndarray:
    """12-bin chroma vector of a window.

    'count' adds 1 per sounding note occurrence, 'duration' adds the note's
    sounding ticks within the window.  Raises ValueError on an empty window.
    """
    if weighting not in CHROMA_WEIGHTINGS:
        raise ValueError(f"unknown chroma weighting {weighting!r}")
    if window.is_empty:
        raise ValueError("empty sonority: window has no sounding notes")
    chroma = np.zeros(12, dtype=float)
    for pitch, overlap in window.sounding:
        chroma[pitch % 12] += 1.0 if weighting == "count" else float(overlap)
    return chroma


def chroma_from_pitch_classes(pitch_classes: Iterable[int]) -> np.ndarray:
    """Binary-ish chroma from a pitch-class multiset (each occurrence adds 1)."""
    chroma = np.zeros(12, dtype=float)
    for pc in pitch_classes:
        chroma[pc % 12] += 1.0
    if not chroma.any():
        raise ValueError("empty sonority: no pitch classes given")
    return chroma
