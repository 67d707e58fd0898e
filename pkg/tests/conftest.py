"""Shared builders for the test suite."""
from __future__ import annotations

from pathlib import Path

import pytest

from tonaltension.music import Bar, Note, Piece, TimeSignature

FIXTURES = Path(__file__).parent / "fixtures"

MAJOR = (0, 4, 7)
MINOR = (0, 3, 7)


def triad(root: int, quality: tuple[int, ...] = MAJOR, octave: int = 5) -> list[int]:
    base = 12 * octave + root
    return [base + offset for offset in quality]


def make_piece(
    bar_notes: list[list[tuple]],
    tpq: int = 480,
    numerator: int = 4,
    denominator: int = 4,
    tempo_events: tuple[tuple[int, int], ...] = ((0, 500_000),),
    percussion_tracks: tuple[int, ...] = (),
) -> Piece:
    """Piece from per-bar note rows (onset_in_bar, duration, pitch, velocity[, instrument[, track]])."""
    sig = TimeSignature(numerator, denominator)
    span = sig.span_ticks(tpq)
    bars = []
    for index, rows in enumerate(bar_notes):
        start = index * span
        notes = []
        for row in rows:
            onset, duration, pitch, velocity = row[:4]
            instrument = row[4] if len(row) > 4 else 0
            track = row[5] if len(row) > 5 else 0
            notes.append(
                Note(start + onset, duration, pitch, velocity, instrument, track)
            )
        bars.append(Bar(index, start, start + span, sig, tuple(sorted(notes))))
    return Piece(
        ticks_per_quarter=tpq,
        bars=tuple(bars),
        tempo_events=tempo_events,
        percussion_tracks=frozenset(percussion_tracks),
    )


def chord_bars(roots: list[int], tpq: int = 480, velocity: int = 64) -> Piece:
    """One sustained root-position major triad per bar, whole-bar duration."""
    span = TimeSignature(4, 4).span_ticks(tpq)
    return make_piece(
        [[(0, span, pitch, velocity) for pitch in triad(root)] for root in roots],
        tpq=tpq,
    )


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    assert FIXTURES.is_dir(), "run tests/build_fixtures.py first"
    return FIXTURES
