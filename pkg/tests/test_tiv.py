"""Tonal interval vectors: DFT coefficients, distances, dissonance."""
from __future__ import annotations

import numpy as np
import pytest

from tonaltension.music import Key, chroma_from_pitch_classes
from tonaltension.tiv import (
    AUDIO_WEIGHTS,
    DEFAULT_WEIGHTS,
    SYMBOLIC_WEIGHTS,
    WeightProfile,
    angular_distance,
    compute_tiv,
    dissonance,
    euclidean_distance,
    function_tivs,
    key_tiv,
    max_norm,
    pitch_class_tiv,
)


def fft_reference(chroma: np.ndarray, weights: WeightProfile) -> np.ndarray:
    """Independent coefficient oracle via numpy's FFT (same sign convention)."""
    spectrum = np.fft.fft(np.asarray(chroma, dtype=float) / np.sum(chroma))
    return np.asarray(weights.as_array()) * spectrum[1:7]


class TestComputeTiv:
    def test_matches_fft_on_random_chromas(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            chroma = rng.random(12) + 1e-6
            tiv = compute_tiv(chroma)
            assert np.allclose(tiv.as_array(), fft_reference(chroma, DEFAULT_WEIGHTS),
                               atol=1e-12, rtol=0)

    def test_single_pitch_class_has_full_magnitude(self):
        tiv = compute_tiv(chroma_from_pitch_classes((3,)))
        assert np.allclose(np.abs(tiv.as_array()), DEFAULT_WEIGHTS.as_array())
        assert tiv.norm() == pytest.approx(max_norm(DEFAULT_WEIGHTS), abs=1e-12)

    def test_uniform_chroma_vanishes(self):
        tiv = compute_tiv(np.ones(12))
        assert np.max(np.abs(tiv.as_array())) <= 1e-12

    def test_transposition_preserves_magnitudes(self):
        chroma = chroma_from_pitch_classes((0, 4, 7, 10))
        base = np.abs(compute_tiv(chroma).as_array())
        for shift in range(1, 12):
            shifted = np.abs(compute_tiv(np.roll(chroma, shift)).as_array())
            assert np.allclose(shifted, base, atol=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            compute_tiv(np.ones(11))
        with pytest.raises(ValueError):
            compute_tiv(np.zeros(12))
        negative = np.ones(12)
        negative[3] = -0.5
        with pytest.raises(ValueError):
            compute_tiv(negative)

    def test_scale_invariance(self):
        chroma = chroma_from_pitch_classes((0, 4, 7))
        a = compute_tiv(chroma).as_array()
        b = compute_tiv(chroma * 37.5).as_array()
        assert np.allclose(a, b, atol=1e-12)


class TestWeightProfiles:
    def test_profile_lengths_and_positivity(self):
        for profile in (DEFAULT_WEIGHTS, SYMBOLIC_WEIGHTS, AUDIO_WEIGHTS):
            assert len(profile.weights) == 6
            assert all(w > 0 for w in profile.weights)

    def test_symbolic_max_norm(self):
        assert max_norm(SYMBOLIC_WEIGHTS) == pytest.approx(np.sqrt(1080.0), abs=1e-12)

    def test_invalid_profiles_rejected(self):
        with pytest.raises(ValueError):
            WeightProfile((1, 2, 3))
        with pytest.raises(ValueError):
            WeightProfile((1, 2, 3, 4, 5, 0))


class TestDistances:
    def tivs(self):
        pcs = [(0, 4, 7), (5, 9, 0), (2, 7, 11), (0, 3, 6, 9)]
        return [compute_tiv(chroma_from_pitch_classes(p)) for p in pcs]

    def test_euclidean_identity_and_symmetry(self):
        a, b, *_ = self.tivs()
        assert euclidean_distance(a, a) == 0.0
        assert euclidean_distance(a, b) == pytest.approx(euclidean_distance(b, a))
        assert euclidean_distance(a, b) > 0

    def test_euclidean_matches_numpy(self):
        a, b, *_ = self.tivs()
        expected = float(np.linalg.norm(a.as_array() - b.as_array()))
        assert euclidean_distance(a, b) == pytest.approx(expected, abs=1e-12)

    def test_mixed_profiles_rejected(self):
        a = compute_tiv(chroma_from_pitch_classes((0, 4, 7)), DEFAULT_WEIGHTS)
        b = compute_tiv(chroma_from_pitch_classes((0, 4, 7)), AUDIO_WEIGHTS)
        with pytest.raises(ValueError):
            euclidean_distance(a, b)

    def test_angular_self_distance_zero(self):
        a, b, *_ = self.tivs()
        assert angular_distance(a, a) == pytest.approx(0.0, abs=1e-7)
        assert 0 <= angular_distance(a, b) <= np.pi

    def test_angular_scale_invariance(self):
        chroma = chroma_from_pitch_classes((0, 4, 7))
        other = chroma_from_pitch_classes((2, 5, 9))
        base = angular_distance(compute_tiv(chroma), compute_tiv(other))
        scaled = angular_distance(compute_tiv(chroma * 3.0), compute_tiv(other * 0.25))
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_angular_zero_vector_rejected(self):
        from tonaltension.tiv import TonalIntervalVector

        zero = TonalIntervalVector((0j, 0j, 0j, 0j, 0j, 0j))
        ref = compute_tiv(chroma_from_pitch_classes((0,)))
        with pytest.raises(ValueError):
            angular_distance(zero, ref)


class TestDissonance:
    def test_bounds_snap_exactly(self):
        single = compute_tiv(chroma_from_pitch_classes((0,)))
        uniform = compute_tiv(np.ones(12))
        assert dissonance(single) == 0.0
        assert dissonance(uniform) == 1.0

    def test_fifth_below_tritone(self):
        fifth = dissonance(compute_tiv(chroma_from_pitch_classes((0, 7))))
        tritone = dissonance(compute_tiv(chroma_from_pitch_classes((0, 6))))
        assert 0 < fifth < tritone < 1

    def test_transposition_invariance(self):
        chroma = chroma_from_pitch_classes((0, 4, 7))
        base = dissonance(compute_tiv(chroma))
        for shift in range(12):
            assert dissonance(compute_tiv(np.roll(chroma, shift))) == pytest.approx(
                base, abs=1e-12
            )


class TestKeyAndFunctionTivs:
    def test_key_tiv_is_scale_tiv(self):
        key = Key(2, "major")
        expected = compute_tiv(chroma_from_pitch_classes(key.scale_pitch_classes()))
        assert np.allclose(key_tiv(key).as_array(), expected.as_array())

    def test_function_tivs_are_primary_triads(self):
        tonic, subdominant, dominant = function_tivs(Key(0, "major"))
        for tiv, pcs in (
            (tonic, (0, 4, 7)),
            (subdominant, (5, 9, 0)),
            (dominant, (7, 11, 2)),
        ):
            expected = compute_tiv(chroma_from_pitch_classes(pcs))
            assert np.allclose(tiv.as_array(), expected.as_array())

    def test_minor_dominant_is_major_triad(self):
        # harmonic-minor convention: V of A minor is E major (4, 8, 11)
        _, _, dominant = function_tivs(Key(9, "minor"))
        expected = compute_tiv(chroma_from_pitch_classes((4, 8, 11)))
        assert np.allclose(dominant.as_array(), expected.as_array())

    def test_pitch_class_tiv_matches_direct(self):
        for pc in range(12):
            expected = compute_tiv(chroma_from_pitch_classes((pc,)))
            assert np.allclose(pitch_class_tiv(pc).as_array(), expected.as_array())
