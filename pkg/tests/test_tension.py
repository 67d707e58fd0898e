"""Harmonic tension curves: components, similarity, clustering, serialization."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import chord_bars, make_piece, triad
from tonaltension.music import ChordWindow, Key
from tonaltension.tension import (
    DEFAULT_SIMILARITY_SCALE,
    TensionCurve,
    TensionWeights,
    bar_tension,
    chord_tension,
    cluster_curves,
    curve_from_csv,
    curve_from_json,
    curve_similarity,
    curve_similarity_detail,
    curve_to_csv,
    curve_to_json,
    estimate_key,
    load_curve_file,
    piece_tension_components,
    resample_curve,
    znormalize,
)

C_MAJOR = Key(0, "major")


def window(pcs, start=0, end=480, dur=480):
    return ChordWindow(start, end, tuple((60 + pc, dur) for pc in pcs))


class TestChordTension:
    def test_first_chord_has_no_motion_terms(self):
        parts = chord_tension(None, window((0, 4, 7)), C_MAJOR)
        assert parts.d_prev == 0.0
        assert parts.voice_leading == 0.0
        assert parts.d_key > 0
        assert parts.dissonance > 0

    def test_empty_previous_window_ignored(self):
        silent = ChordWindow(0, 480, ())
        parts = chord_tension(silent, window((0, 4, 7)), C_MAJOR)
        assert parts.d_prev == 0.0 and parts.voice_leading == 0.0

    def test_motion_terms_appear_after_a_change(self):
        parts = chord_tension(window((0, 4, 7)), window((5, 9, 0)), C_MAJOR)
        assert parts.d_prev > 0 and parts.voice_leading > 0

    def test_combined_is_weighted_sum(self):
        weights = TensionWeights(2.0, 3.0, 5.0, 7.0, 11.0)
        parts = chord_tension(window((0, 4, 7)), window((7, 11, 2)), C_MAJOR, weights)
        expected = (
            2.0 * parts.d_prev
            + 3.0 * parts.d_key
            + 5.0 * parts.d_func
            + 7.0 * parts.dissonance
            + 11.0 * parts.voice_leading
        )
        assert parts.combined == pytest.approx(expected, abs=1e-12)

    def test_tonic_tenser_outside_its_key(self):
        in_key = chord_tension(None, window((0, 4, 7)), C_MAJOR)
        remote = chord_tension(None, window((0, 4, 7)), Key(6, "major"))
        assert remote.d_key > in_key.d_key

    def test_default_weights(self):
        weights = TensionWeights()
        assert (
            weights.w_prev,
            weights.w_key,
            weights.w_func,
            weights.w_dissonance,
            weights.w_voice_leading,
        ) == (1.0, 1.0, 1.0, 30.3, 2.71)


class TestBarTension:
    def test_empty_bar_is_zero(self):
        assert bar_tension([]) == 0.0

    def test_mean_of_combined(self):
        a = chord_tension(None, window((0, 4, 7)), C_MAJOR)
        b = chord_tension(None, window((0, 6)), C_MAJOR)
        assert bar_tension([a, b]) == pytest.approx((a.combined + b.combined) / 2)


class TestEstimateKey:
    def test_major_progression(self):
        piece = chord_bars([0, 5, 7, 0])
        assert estimate_key(piece) == Key(0, "major")

    def test_transposed_progression(self):
        piece = make_piece(
            [[(0, 1920, p + 2, 64) for p in triad(r)] for r in (0, 5, 7, 0)]
        )
        assert estimate_key(piece) == Key(2, "major")

    def test_minor_progression(self):
        rows = []
        for root, quality in ((9, (0, 3, 7)), (2, (0, 3, 7)), (4, (0, 4, 7)), (9, (0, 3, 7))):
            rows.append([(0, 1920, 48 + root + q, 64) for q in quality])
        piece = make_piece(rows)
        assert estimate_key(piece) == Key(9, "minor")

    def test_no_harmonic_notes_rejected(self):
        piece = make_piece([[(0, 480, 38, 90, 118, 3)]], percussion_tracks=(3,))
        with pytest.raises(ValueError):
            estimate_key(piece)


class TestPieceCurve:
    def test_one_value_per_bar_and_silence_flags(self):
        piece = make_piece([
            [(0, 1920, p, 64) for p in triad(0)],
            [],
            [(0, 1920, p, 64) for p in triad(7)],
        ])
        curve, components = piece_tension_components(piece)
        assert curve.bar_count == 3
        assert curve.silent == (False, True, False)
        assert curve.values[1] == 0.0
        assert components[1] == []
        assert len(components[0]) >= 1

    def test_previous_chord_threads_across_bars(self):
        piece = chord_bars([0, 7])
        _, components = piece_tension_components(piece)
        assert components[1][0].d_prev > 0
        assert components[1][0].voice_leading > 0

    def test_repeated_chord_gives_flat_curve(self):
        curve, _ = piece_tension_components(chord_bars([0, 0, 0, 0]))
        assert np.ptp(curve.as_array()) == pytest.approx(0.0, abs=1e-12)

    def test_fixed_key_changes_key_terms(self):
        piece = chord_bars([0, 5, 7, 0])
        home, _ = piece_tension_components(piece, key=Key(0, "major"))
        away, _ = piece_tension_components(piece, key=Key(6, "major"))
        assert np.mean(away.as_array()) > np.mean(home.as_array())

    def test_window_policy_changes_resolution(self):
        rows = [[(0, 960, p, 64) for p in triad(0)] + [(960, 960, p, 64) for p in triad(7)]]
        piece = make_piece(rows)
        _, by_beat = piece_tension_components(piece, window_policy="beat")
        _, by_half = piece_tension_components(piece, window_policy="half_bar")
        _, by_bar = piece_tension_components(piece, window_policy="full_bar")
        assert len(by_beat[0]) == 4  # each half-bar chord sounds through two beats
        assert len(by_half[0]) == 2
        assert len(by_bar[0]) == 1


class TestSimilarity:
    def test_pearson_branch_on_varied_target(self):
        target = [1.0, 2.0, 3.0, 4.0]
        result = curve_similarity_detail([2.0, 4.0, 6.0, 8.0], target)
        assert result.branch == "pearson"
        assert result.value == pytest.approx(1.0)

    def test_anticorrelated(self):
        assert curve_similarity([4.0, 3.0, 2.0, 1.0], [1.0, 2.0, 3.0, 4.0]) == pytest.approx(-1.0)

    def test_fallback_branch_on_flat_target(self):
        flat = [5.0, 5.0, 5.0]
        result = curve_similarity_detail(list(flat), flat)
        assert result.branch == "fallback"
        assert result.value == 1.0

    def test_fallback_decreases_with_offset(self):
        flat = [5.0] * 4
        values = [
            curve_similarity([5.0 + d] * 4, flat, scale_ref=10.0) for d in (0.5, 1.0, 2.0)
        ]
        assert values[0] > values[1] > values[2]

    def test_fallback_saturates_at_minus_one(self):
        assert curve_similarity([100.0] * 3, [0.0] * 3, scale_ref=10.0) == -1.0

    def test_variance_threshold_boundary(self):
        # variance exactly at the threshold stays in the fallback branch
        tgt = [0.0, math.sqrt(0.002)]  # var == 0.0005 * 2 ... computed below
        var = float(np.var(tgt))
        assert var < 0.001
        assert curve_similarity_detail(tgt, tgt).branch == "fallback"

    def test_constant_candidate_with_varied_target_uses_fallback(self):
        result = curve_similarity_detail([3.0, 3.0, 3.0], [1.0, 5.0, 9.0])
        assert result.branch == "fallback"

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            curve_similarity([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            curve_similarity([], [])

    def test_bad_scale_ref_rejected(self):
        with pytest.raises(ValueError):
            curve_similarity([1.0], [1.0], scale_ref=0.0)

    def test_default_scale(self):
        assert DEFAULT_SIMILARITY_SCALE == 20.0


class TestResampleAndNormalize:
    def test_identity_when_length_matches(self):
        values = [1.0, 3.0, 2.0]
        assert np.allclose(resample_curve(values, 3), values)

    def test_endpoints_preserved(self):
        out = resample_curve([1.0, 5.0, 2.0, 8.0], 9)
        assert out[0] == 1.0 and out[-1] == 8.0

    def test_single_point_broadcasts(self):
        assert np.allclose(resample_curve([4.0], 5), 4.0)

    def test_znormalize_flat_is_zeros(self):
        assert np.array_equal(znormalize([2.0, 2.0, 2.0]), np.zeros(3))

    def test_znormalize_stats(self):
        out = znormalize([1.0, 2.0, 3.0, 4.0])
        assert out.mean() == pytest.approx(0.0, abs=1e-12)
        assert out.std() == pytest.approx(1.0, abs=1e-12)


class TestClustering:
    def curves(self):
        rng = np.random.default_rng(3)
        shapes = {
            "rise": np.linspace(0.0, 1.0, 12),
            "fall": np.linspace(1.0, 0.0, 12),
            "arch": np.concatenate([np.linspace(0, 1, 6), np.linspace(1, 0, 6)]),
        }
        curves, labels = [], []
        for name, base in shapes.items():
            for _ in range(4):
                curves.append(list(10.0 * base + rng.normal(0, 0.02, 12)))
                labels.append(name)
        return curves, labels

    def test_recovers_three_shapes(self):
        curves, labels = self.curves()
        result = cluster_curves(curves, 3)
        by_cluster = {}
        for label, assignment in zip(labels, result.assignments):
            by_cluster.setdefault(assignment, set()).add(label)
        assert len(result.medoid_indices) == 3
        assert all(len(members) == 1 for members in by_cluster.values())

    def test_medoids_are_members(self):
        curves, _ = self.curves()
        result = cluster_curves(curves, 3)
        for medoid, cluster in zip(result.medoid_indices, sorted(set(result.assignments))):
            assert result.assignments[medoid] == cluster

    def test_deterministic(self):
        curves, _ = self.curves()
        assert cluster_curves(curves, 3) == cluster_curves(curves, 3)

    def test_k_clamped_to_population(self):
        result = cluster_curves([[1.0, 2.0], [2.0, 1.0]], 5)
        assert len(result.medoid_indices) == 2

    def test_mixed_lengths_allowed(self):
        result = cluster_curves([[0, 1, 2], [0, 0.5, 1, 1.5, 2], [2, 1, 0]], 2)
        assert len(result.assignments) == 3


class TestSerialization:
    def curve(self):
        return TensionCurve(values=(1.5, 0.0, 2.25), silent=(False, True, False))

    def test_csv_roundtrip_preserves_values(self):
        # the two-column CSV format carries values only; silence flags are
        # JSON-side metadata
        text = curve_to_csv(self.curve())
        parsed = curve_from_csv(text)
        assert parsed.values == self.curve().values
        assert parsed.silent == (False, False, False)

    def test_csv_header_enforced(self):
        with pytest.raises(ValueError):
            curve_from_csv("bar,value\n0,1.0\n")

    def test_csv_indices_must_be_contiguous(self):
        text = curve_to_csv(self.curve()).replace("\n1,", "\n3,")
        with pytest.raises(ValueError):
            curve_from_csv(text)

    def test_json_roundtrip_with_metadata(self):
        text = curve_to_json(self.curve(), source="x.mid")
        data = json.loads(text)
        assert data["source"] == "x.mid"
        assert curve_from_json(text) == self.curve()

    def test_load_curve_file_by_extension(self, tmp_path):
        csv_path = tmp_path / "curve.csv"
        json_path = tmp_path / "curve.json"
        csv_path.write_text(curve_to_csv(self.curve()))
        json_path.write_text(curve_to_json(self.curve()))
        assert load_curve_file(str(csv_path)).values == self.curve().values
        assert load_curve_file(str(json_path)) == self.curve()
