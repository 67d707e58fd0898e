"""Score-model primitives: bars, windows, chroma."""
from __future__ import annotations

import numpy as np
import pytest

from conftest import make_piece, triad
from tonaltension.music import (
    Bar,
    ChordWindow,
    Key,
    Note,
    Piece,
    TimeSignature,
    chroma_from_pitch_classes,
    chroma_of,
    extract_chord_windows,
    segment_into_bars,
)


class TestTimeSignature:
    def test_span_ticks(self):
        assert TimeSignature(4, 4).span_ticks(480) == 1920
        assert TimeSignature(3, 4).span_ticks(480) == 1440
        assert TimeSignature(6, 8).span_ticks(480) == 1440
        assert TimeSignature(7, 8).span_ticks(480) == 1680

    def test_non_power_of_two_denominator_rejected(self):
        with pytest.raises(ValueError):
            TimeSignature(4, 3)

    def test_fractional_span_rejected(self):
        # 1/32 at tpq 4 would span half a tick
        with pytest.raises(ValueError):
            TimeSignature(1, 32).span_ticks(4)


class TestNote:
    def test_field_validation(self):
        with pytest.raises(ValueError):
            Note(-1, 10, 60, 64)
        with pytest.raises(ValueError):
            Note(0, 0, 60, 64)
        with pytest.raises(ValueError):
            Note(0, 10, 128, 64)
        with pytest.raises(ValueError):
            Note(0, 10, 60, 0)
        with pytest.raises(ValueError):
            Note(0, 10, 60, 64, instrument=128)

    def test_derived_properties(self):
        note = Note(100, 50, 61, 80)
        assert note.offset == 150
        assert note.pitch_class == 1

    def test_sort_order_starts_with_onset(self):
        late = Note(200, 10, 50, 64)
        early = Note(100, 10, 70, 64)
        assert sorted([late, early]) == [early, late]


class TestBar:
    def test_out_of_span_note_rejected(self):
        sig = TimeSignature(4, 4)
        with pytest.raises(ValueError):
            Bar(0, 0, 1920, sig, (Note(1920, 10, 60, 64),))

    def test_instruments_excludes_tracks(self):
        sig = TimeSignature(4, 4)
        bar = Bar(0, 0, 1920, sig, (
            Note(0, 100, 60, 64, instrument=0, track=0),
            Note(0, 100, 36, 64, instrument=118, track=3),
        ))
        assert bar.instruments() == (0, 118)
        assert bar.instruments(exclude_tracks=frozenset({3})) == (0,)
        assert bar.note_count == 2


class TestKey:
    def test_scale_pitch_classes(self):
        assert Key(0, "major").scale_pitch_classes() == (0, 2, 4, 5, 7, 9, 11)
        assert Key(9, "minor").scale_pitch_classes() == (0, 2, 4, 5, 7, 9, 11)
        assert Key(7, "major").scale_pitch_classes() == (0, 2, 4, 6, 7, 9, 11)

    def test_name(self):
        assert Key(0, "major").name == "C major"
        assert str(Key(10, "minor")) == "A# minor"

    def test_validation(self):
        with pytest.raises(ValueError):
            Key(12, "major")
        with pytest.raises(ValueError):
            Key(0, "dorian")


class TestSegmentation:
    def test_notes_assigned_by_onset(self):
        notes = [Note(0, 3000, 60, 64), Note(2000, 100, 64, 64)]
        bars = segment_into_bars(notes, [(0, TimeSignature(4, 4))], 480)
        assert len(bars) == 2
        assert [n.pitch for n in bars[0].notes] == [60]
        assert [n.pitch for n in bars[1].notes] == [64]
        assert (bars[0].start_tick, bars[0].end_tick) == (0, 1920)
        assert (bars[1].start_tick, bars[1].end_tick) == (1920, 3840)

    def test_signature_change_at_boundary(self):
        events = [(0, TimeSignature(4, 4)), (1920, TimeSignature(3, 4))]
        notes = [Note(0, 100, 60, 64), Note(3000, 100, 60, 64)]
        bars = segment_into_bars(notes, events, 480)
        assert bars[0].time_signature == TimeSignature(4, 4)
        assert bars[1].time_signature == TimeSignature(3, 4)
        assert bars[1].span == 1440

    def test_empty_input_gives_no_bars(self):
        assert segment_into_bars([], [(0, TimeSignature(4, 4))], 480) == []

    def test_first_event_must_be_at_zero(self):
        with pytest.raises(ValueError):
            segment_into_bars([Note(0, 1, 60, 64)], [(10, TimeSignature(4, 4))], 480)


class TestChordWindows:
    def piece(self) -> Piece:
        # quarter chord, then a half note sustained across two beats
        rows = [[(0, 480, p, 64) for p in triad(0)] + [(960, 960, 62, 64)]]
        return make_piece(rows)

    def test_beat_policy_window_count_and_clipping(self):
        bar = self.piece().bars[0]
        windows = extract_chord_windows(bar, "beat")
        assert len(windows) == 4
        assert windows[0].start_tick == 0 and windows[0].end_tick == 480
        assert windows[0].pitches == tuple(triad(0))
        assert windows[1].is_empty
        # the half note overlaps beats 3 and 4 for 480 ticks each
        assert windows[2].sounding == ((62, 480),)
        assert windows[3].sounding == ((62, 480),)

    def test_full_bar_policy_single_window(self):
        bar = self.piece().bars[0]
        (window,) = extract_chord_windows(bar, "full_bar")
        assert window.start_tick == 0 and window.end_tick == 1920
        assert set(window.pitches) == set(triad(0)) | {62}

    def test_half_bar_policy(self):
        bar = self.piece().bars[0]
        first, second = extract_chord_windows(bar, "half_bar")
        assert first.end_tick == second.start_tick == 960
        assert 62 in second.pitches and 62 not in first.pitches

    def test_unknown_policy_rejected(self):
        with pytest.raises(ValueError):
            extract_chord_windows(self.piece().bars[0], "whole_piece")

    def test_excluded_tracks_do_not_sound(self):
        rows = [[(0, 480, 60, 64, 0, 0), (0, 480, 38, 99, 118, 5)]]
        bar = make_piece(rows).bars[0]
        (w, *_rest) = extract_chord_windows(bar, "beat", exclude_tracks=frozenset({5}))
        assert w.pitches == (60,)


class TestChroma:
    def test_duration_weighting(self):
        window = ChordWindow(0, 480, ((60, 480), (64, 240)))
        chroma = chroma_of(window, "duration")
        assert chroma[0] == 480 and chroma[4] == 240
        assert chroma.sum() == 720

    def test_count_weighting(self):
        window = ChordWindow(0, 480, ((60, 480), (64, 240), (72, 60)))
        chroma = chroma_of(window, "count")
        assert chroma[0] == 2 and chroma[4] == 1

    def test_from_pitch_classes(self):
        chroma = chroma_from_pitch_classes((0, 4, 7))
        expected = np.zeros(12)
        expected[[0, 4, 7]] = 1
        assert np.array_equal(chroma, expected)


def test_piece_note_accessors():
    piece = make_piece(
        [[(0, 480, 60, 64, 0, 0), (0, 480, 38, 99, 118, 4)]],
        percussion_tracks=(4,),
    )
    assert piece.note_count == 2
    assert [n.pitch for n in piece.harmonic_notes()] == [60]
    assert piece.bar_count == 1
