"""Tonal interval vectors: weighted DFT of chroma and distances on them.

A tonal interval vector (TIV) holds the complex DFT coefficients k = 1..6 of
a sum-normalized chroma vector, each scaled by a perceptual weight.  Distances
between TIVs track perceived harmonic relatedness: transpositions rotate
coefficient phases but preserve magnitudes, fifth-related sonorities sit close
together, and the vector norm acts as a consonance indicator.

The default weight profile is the symbolic-input profile from the TIV
literature with the k = 4 weight relaxed 16 -> 15 so that the canonical
consonance ordering (fifth < major triad < tritone < chromatic cluster) holds
for the norm-based dissonance measure; the unmodified literature profiles are
exported as ``SYMBOLIC_WEIGHTS`` and ``AUDIO_WEIGHTS``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .music import Key, chroma_from_pitch_classes


@dataclass(frozen=True)
class WeightProfile:
    """Per-coefficient weights w(k) for k = 1..6, all positive."""

    weights: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.weights) != 6:
            raise ValueError("a weight profile needs exactly 6 weights")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


DEFAULT_WEIGHTS = WeightProfile((2.0, 11.0, 17.0, 15.0, 19.0, 7.0))
SYMBOLIC_WEIGHTS = WeightProfile((2.0, 11.0, 17.0, 16.0, 19.0, 7.0))
AUDIO_WEIGHTS = WeightProfile((3.0, 8.0, 11.5, 15.0, 14.5, 7.5))

# basis[k-1, n] = exp(-i 2 pi k n / 12) for k = 1..6
_DFT_BASIS = np.exp(-2j * np.pi * np.outer(np.arange(1, 7), np.arange(12)) / 12)


@dataclass(frozen=True)
class TonalIntervalVector:
    """Six weighted DFT coefficients plus the profile that produced them."""

    coefficients: tuple[complex, complex, complex, complex, complex, complex]
    weights: WeightProfile = DEFAULT_WEIGHTS

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=complex)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def scaled(self, factor: float) -> "TonalIntervalVector":
        """The vector with every coefficient multiplied by ``factor``."""
        coeffs = tuple(complex(c) * factor for c in self.coefficients)
        return TonalIntervalVector(coeffs, self.weights)


def compute_tiv(chroma: np.ndarray, weights: WeightProfile = DEFAULT_WEIGHTS) -> TonalIntervalVector:
    """Weighted DFT coefficients k = 1..6 of a sum-normalized chroma vector.

    The chroma must have 12 non-negative bins and positive sum; an all-zero
    chroma (an empty sonority) is an error.
    """
    c = np.asarray(chroma, dtype=float)
    if c.shape != (12,):
        raise ValueError(f"chroma must have shape (12,), got {c.shape}")
    if (c < 0).any():
        raise ValueError("chroma bins must be non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("empty sonority: chroma sums to zero")
    coeffs = weights.as_array() * (_DFT_BASIS @ (c / total))
    return TonalIntervalVector(tuple(complex(x) for x in coeffs), weights)


def _check_profiles(a: TonalIntervalVector, b: TonalIntervalVector) -> None:
    if a.weights != b.weights:
        raise ValueError("cannot compare vectors built from different weight profiles")


def euclidean_distance(a: TonalIntervalVector, b: TonalIntervalVector) -> float:
    """Euclidean distance treating each complex coefficient as two reals."""
    _check_profiles(a, b)
    return float(np.linalg.norm(a.as_array() - b.as_array()))


def angular_distance(a: TonalIntervalVector, b: TonalIntervalVector) -> float:
    """Angle in [0, pi] between two vectors under the real inner product.

    The inner product is Re(sum a_k * conj(b_k)); the cosine is clamped to
    [-1, 1] before arccos.  Zero-norm vectors have no direction and raise.
    """
    _check_profiles(a, b)
    va, vb = a.as_array(), b.as_array()
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("angular distance undefined for zero-norm vector")
    cos = float(np.real(np.vdot(va, vb)) / (na * nb))
    return float(np.arccos(min(1.0, max(-1.0, cos))))


def max_norm(weights: WeightProfile = DEFAULT_WEIGHTS) -> float:
    """Largest possible TIV norm under a profile: the norm of the weights.

    A single-pitch-class chroma aligns every DFT bin at magnitude 1, so the
    bound is attained.
    """
    return float(np.linalg.norm(weights.as_array()))


def dissonance(vector: TonalIntervalVector, max_norm_value: float | None = None) -> float:
    """1 - |T| / maxNorm, clamped to [0, 1].

    By default maxNorm is the analytic bound of the vector's own profile.
    Results within 1e-12 of 0 or 1 snap to the exact bound so that single
    pitch classes report dissonance exactly 0.
    """
    if max_norm_value is None:
        max_norm_value = max_norm(vector.weights)
    if max_norm_value <= 0:
        raise ValueError("max norm must be positive")
    value = 1.0 - vector.norm() / max_norm_value
    value = min(1.0, max(0.0, value))
    if value < 1e-12:
        return 0.0
    if value > 1.0 - 1e-12:
        return 1.0
    return value


@lru_cache(maxsize=256)
def _key_tiv_cached(tonic: int, mode: str, weights: WeightProfile) -> TonalIntervalVector:
    key = Key(tonic, mode)
    chroma = chroma_from_pitch_classes(key.scale_pitch_classes())
    return compute_tiv(chroma, weights)


def key_tiv(key: Key, weights: WeightProfile = DEFAULT_WEIGHTS) -> TonalIntervalVector:
    """TIV of the key's diatonic scale set (natural minor for minor keys)."""
    return _key_tiv_cached(key.tonic, key.mode, weights)


# Triad degree offsets relative to the tonic.  Minor keys take the
# harmonic-minor dominant (major triad on the fifth degree).
_MAJOR_FUNCTIONS = ((0, 4, 7), (5, 9, 0), (7, 11, 2))
_MINOR_FUNCTIONS = ((0, 3, 7), (5, 8, 0), (7, 11, 2))


@lru_cache(maxsize=256)
def _function_tivs_cached(
    tonic: int, mode: str, weights: WeightProfile
) -> tuple[TonalIntervalVector, TonalIntervalVector, TonalIntervalVector]:
    offsets = _MAJOR_FUNCTIONS if mode == "major" else _MINOR_FUNCTIONS
    tivs = []
    for triad in offsets:
        chroma = chroma_from_pitch_classes((tonic + d) % 12 for d in triad)
        tivs.append(compute_tiv(chroma, weights))
    return tuple(tivs)


def function_tivs(
    key: Key, weights: WeightProfile = DEFAULT_WEIGHTS
) -> tuple[TonalIntervalVector, TonalIntervalVector, TonalIntervalVector]:
    """TIVs of the tonic, subdominant, and dominant triads of a key."""
    return _function_tivs_cached(key.tonic, key.mode, weights)


@lru_cache(maxsize=64)
def _pc_tivs(weights: WeightProfile) -> tuple[TonalIntervalVector, ...]:
    out = []
    for pc in range(12):
        chroma = np.zeros(12)
        chroma[pc] = 1.0
        out.append(compute_tiv(chroma, weights))
    return tuple(out)


def pitch_class_tiv(pc: int, weights: WeightProfile = DEFAULT_WEIGHTS) -> TonalIntervalVector:
    """TIV of a lone pitch class."""
    return _pc_tivs(weights)[pc % 12]
