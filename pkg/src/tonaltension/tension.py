"""Tonal tension curves: per-chord components, key estimation, similarity.

The tension of a chord window combines five ingredients measured in tonal
interval space: distance from the previous chord, angular distance from the
key, angular distance from the nearest tonal function (I/IV/V), norm-based
dissonance, and voice-leading tension.  Bar tension is the mean over the
bar's chord windows, and a piece yields one tension value per bar.

``curve_similarity`` compares a candidate curve against a target: Pearson
correlation when the target actually moves (variance above a threshold),
otherwise a mean-absolute-difference fallback mapped into [-1, 1].
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .music import Bar, ChordWindow, Key, Piece, chroma_of, extract_chord_windows
from .tiv import (
    DEFAULT_WEIGHTS,
    TonalIntervalVector,
    WeightProfile,
    angular_distance,
    compute_tiv,
    dissonance,
    euclidean_distance,
    function_tivs,
    key_tiv,
    max_norm,
)
from .voiceleading import vl_tension

# Fallback similarity scale when no corpus statistic is available.  Training
# replaces it with twice the standard deviation of corpus bar tensions.
DEFAULT_SIMILARITY_SCALE = 20.0

# Probe-tone profiles for key estimation (major/minor templates indexed from
# the tonic), correlated against the piece's duration-weighted chroma.
KRUMHANSL_MAJOR = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
KRUMHANSL_MINOR = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)


@dataclass(frozen=True)
class TensionWeights:
    """Mixing weights for the five tension components."""

    w_prev: float = 1.0
    w_key: float = 1.0
    w_func: float = 1.0
    w_dissonance: float = 30.3
    w_voice_leading: float = 2.71

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.w_prev, self.w_key, self.w_func, self.w_dissonance, self.w_voice_leading)


@dataclass(frozen=True)
class TensionComponents:
    """Per-chord tension breakdown plus the weighted combination."""

    d_prev: float
    d_key: float
    d_func: float
    dissonance: float
    voice_leading: float
    combined: float


@dataclass(frozen=True)
class TensionCurve:
    """One tension value per bar; ``silent`` flags bars with no chords."""

    values: tuple[float, ...]
    silent: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if not self.silent:
            object.__setattr__(self, "silent", tuple(False for _ in self.values))
        if len(self.silent) != len(self.values):
            raise ValueError("silent flags must match values length")

    @property
    def bar_count(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


_NEUTRAL_ANGLE = math.pi / 2


def _safe_angle(a: TonalIntervalVector, b: TonalIntervalVector) -> float:
    # A window whose chroma is uniform has a zero TIV and no direction; treat
    # it as orthogonal to everything rather than erroring mid-analysis.
    try:
        return angular_distance(a, b)
    except ValueError:
        return _NEUTRAL_ANGLE


def chord_tension(
    previous: ChordWindow | None,
    current: ChordWindow,
    key: Key,
    weights: TensionWeights = TensionWeights(),
    *,
    vl_variant: str = "monotone",
    tiv_weights: WeightProfile = DEFAULT_WEIGHTS,
    chroma_weighting: str = "duration",
    max_norm_value: float | None = None,
) -> TensionComponents:
    """Tension components of ``current`` heard after ``previous`` in ``key``.

    With no previous chord the distance and voice-leading terms are 0.  The
    function distance is the smallest angle to the key's I, IV, or V triad
    (harmonic-minor dominant in minor keys).
    """
    cur_tiv = compute_tiv(chroma_of(current, chroma_weighting), tiv_weights)
    d_prev = 0.0
    vl = 0.0
    if previous is not None and not previous.is_empty:
        prev_tiv = compute_tiv(chroma_of(previous, chroma_weighting), tiv_weights)
        d_prev = euclidean_distance(prev_tiv, cur_tiv)
        vl = vl_tension(
            previous.pitch_classes(), current.pitch_classes(), vl_variant, tiv_weights
        )
    d_key = _safe_angle(cur_tiv, key_tiv(key, tiv_weights))
    d_func = min(_safe_angle(cur_tiv, f) for f in function_tivs(key, tiv_weights))
    if max_norm_value is None:
        max_norm_value = max_norm(tiv_weights)
    diss = dissonance(cur_tiv, max_norm_value)
    combined = (
        weights.w_prev * d_prev
        + weights.w_key * d_key
        + weights.w_func * d_func
        + weights.w_dissonance * diss
        + weights.w_voice_leading * vl
    )
    return TensionComponents(d_prev, d_key, d_func, diss, vl, combined)


def bar_tension(components: Sequence[TensionComponents]) -> float:
    """Mean combined tension over a bar's chords; 0.0 for a silent bar."""
    if not components:
        return 0.0
    return float(sum(c.combined for c in components) / len(components))


def estimate_key(piece: Piece) -> Key:
    """Key estimate from the duration-weighted aggregate chroma.

    Correlates the chroma against major and minor probe-tone profiles in all
    transpositions; ties break toward the lower tonic pitch class, major
    before minor.  Percussion tracks are ignored; a piece without harmonic
    notes has no key and raises.
    """
    notes = piece.harmonic_notes()
    if not notes:
        raise ValueError("cannot estimate a key without harmonic notes")
    chroma = np.zeros(12)
    for note in notes:
        chroma[note.pitch_class] += note.duration
    best: tuple[float, int, int] | None = None  # (corr, mode_rank, tonic)
    best_key: Key | None = None
    for mode_rank, (mode, profile) in enumerate(
        (("major", KRUMHANSL_MAJOR), ("minor", KRUMHANSL_MINOR))
    ):
        template = np.asarray(profile)
        for tonic in range(12):
            rotated = np.roll(template, tonic)
            corr = float(np.corrcoef(chroma, rotated)[0, 1])
            entry = (corr, -mode_rank, -tonic)
            if best is None or entry > best:
                best = entry
                best_key = Key(tonic, mode)
    assert best_key is not None
    return best_key


def window_components(
    windows: Sequence[ChordWindow],
    previous: ChordWindow | None,
    key: Key,
    weights: TensionWeights = TensionWeights(),
    vl_variant: str = "monotone",
    tiv_weights: WeightProfile = DEFAULT_WEIGHTS,
    chroma_weighting: str = "duration",
    max_norm_value: float | None = None,
) -> tuple[list[TensionComponents], ChordWindow | None]:
    """Tension components for a run of chord windows, skipping empty ones.

    Returns the components and the last sounding window, so callers that
    stream bars can thread the previous-chord link across calls.
    """
    components: list[TensionComponents] = []
    for window in windows:
        if window.is_empty:
            continue
        components.append(
            chord_tension(
                previous,
                window,
                key,
                weights,
                vl_variant=vl_variant,
                tiv_weights=tiv_weights,
                chroma_weighting=chroma_weighting,
                max_norm_value=max_norm_value,
            )
        )
        previous = window
    return components, previous


def piece_tension_components(
    piece: Piece,
    weights: TensionWeights = TensionWeights(),
    *,
    window_policy: str = "beat",
    vl_variant: str = "monotone",
    tiv_weights: WeightProfile = DEFAULT_WEIGHTS,
    chroma_weighting: str = "duration",
    key: Key | None = None,
    key_window_bars: int | None = None,
    max_norm_mode: str = "analytic",
) -> tuple[TensionCurve, list[list[TensionComponents]]]:
    """Per-bar tension values plus the chord-level breakdown behind them.

    The previous-chord link crosses bar boundaries: the last chord of bar i-1
    is the predecessor of the first chord of bar i.  ``key`` overrides the
    piece's stored estimate; ``key_window_bars`` re-estimates the key every N
    bars instead of using one global key.  ``max_norm_mode`` 'observed' scales
    dissonance by the largest TIV norm seen in the piece instead of the
    analytic bound.
    """
    if max_norm_mode not in ("analytic", "observed"):
        raise ValueError(f"unknown max norm mode {max_norm_mode!r}")

    bar_windows = [
        extract_chord_windows(bar, window_policy, piece.percussion_tracks)
        for bar in piece.bars
    ]

    max_norm_value: float | None = None
    if max_norm_mode == "observed":
        norms = [
            compute_tiv(chroma_of(w, chroma_weighting), tiv_weights).norm()
            for windows in bar_windows
            for w in windows
            if not w.is_empty
        ]
        max_norm_value = max(norms) if norms else None

    keys = _bar_keys(piece, key, key_window_bars)

    all_components: list[list[TensionComponents]] = []
    values: list[float] = []
    silent: list[bool] = []
    previous: ChordWindow | None = None
    for bar_index, windows in enumerate(bar_windows):
        components, previous = window_components(
            windows,
            previous,
            keys[bar_index],
            weights,
            vl_variant,
            tiv_weights,
            chroma_weighting,
            max_norm_value,
        )
        all_components.append(components)
        values.append(bar_tension(components))
        silent.append(not components)
    return TensionCurve(tuple(values), tuple(silent)), all_components


def _bar_keys(piece: Piece, key: Key | None, key_window_bars: int | None) -> list[Key]:
    if key is None:
        key = piece.key_estimate or estimate_key(piece)
    if not key_window_bars:
        return [key for _ in piece.bars]
    if key_window_bars < 1:
        raise ValueError("key_window_bars must be >= 1")
    keys: list[Key] = []
    current = key
    for start in range(0, piece.bar_count, key_window_bars):
        segment = piece.bars[start : start + key_window_bars]
        notes = [
            n
            for bar in segment
            for n in bar.notes
            if n.track not in piece.percussion_tracks
        ]
        if notes:
            chroma = np.zeros(12)
            for n in notes:
                chroma[n.pitch_class] += n.duration
            current = _key_from_chroma(chroma)
        keys.extend(current for _ in segment)
    return keys


def _key_from_chroma(chroma: np.ndarray) -> Key:
    best: tuple[float, int, int] | None = None
    best_key = Key(0, "major")
    for mode_rank, (mode, profile) in enumerate(
        (("major", KRUMHANSL_MAJOR), ("minor", KRUMHANSL_MINOR))
    ):
        template = np.asarray(profile)
        for tonic in range(12):
            corr = float(np.corrcoef(chroma, np.roll(template, tonic))[0, 1])
            entry = (corr, -mode_rank, -tonic)
            if best is None or entry > best:
                best = entry
                best_key = Key(tonic, mode)
    return best_key


def piece_tension_curve(
    piece: Piece,
    weights: TensionWeights = TensionWeights(),
    **kwargs,
) -> TensionCurve:
    """Per-bar tension curve of a piece; see ``piece_tension_components``."""
    curve, _ = piece_tension_components(piece, weights, **kwargs)
    return curve


# ----------------------------------------------------------------------------
# curve similarity
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilarityResult:
    """Similarity value plus which branch produced it."""

    value: float
    branch: str  # 'pearson' or 'fallback'


def _curve_values(curve) -> np.ndarray:
    values = getattr(curve, "values", curve)
    return np.asarray(values, dtype=float)


def curve_similarity_detail(
    candidate,
    target,
    variance_threshold: float = 0.001,
    scale_ref: float | None = None,
) -> SimilarityResult:
    """Curve similarity in [-1, 1] with the branch that was taken.

    Pearson correlation applies when the target variance exceeds the
    threshold, the candidate is not flat, and there are at least two bars.
    Otherwise the fallback 1 - 2 * clamp(meanAbsDiff / scaleRef, 0, 1) keeps
    flat targets comparable: equal curves give 1.0 and the value decreases
    with the mean absolute difference.
    """
    cand = _curve_values(candidate)
    tgt = _curve_values(target)
    if cand.shape != tgt.shape:
        raise ValueError(f"curve lengths differ: {cand.shape[0]} vs {tgt.shape[0]}")
    if cand.size == 0:
        raise ValueError("cannot compare empty curves")
    if scale_ref is None:
        scale_ref = DEFAULT_SIMILARITY_SCALE
    if scale_ref <= 0:
        raise ValueError("scale_ref must be positive")

    if cand.size >= 2 and float(np.var(tgt)) > variance_threshold and float(np.var(cand)) > 0.0:
        sc = cand - cand.mean()
        st = tgt - tgt.mean()
        denom = math.sqrt(float(sc @ sc) * float(st @ st))
        value = float(sc @ st) / denom
        return SimilarityResult(min(1.0, max(-1.0, value)), "pearson")

    mean_abs = float(np.abs(cand - tgt).mean())
    value = 1.0 - 2.0 * min(1.0, max(0.0, mean_abs / scale_ref))
    return SimilarityResult(value, "fallback")


def curve_similarity(
    candidate,
    target,
    variance_threshold: float = 0.001,
    scale_ref: float | None = None,
) -> float:
    """Similarity of two equal-length tension curves; see the detail variant."""
    return curve_similarity_detail(candidate, target, variance_threshold, scale_ref).value


# ----------------------------------------------------------------------------
# curve clustering
# ----------------------------------------------------------------------------


def resample_curve(values: Sequence[float], length: int) -> np.ndarray:
    """Linear resampling of a curve onto ``length`` evenly spaced points."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot resample an empty curve")
    if length < 1:
        raise ValueError("length must be >= 1")
    if arr.size == 1:
        return np.full(length, arr[0])
    positions = np.linspace(0.0, 1.0, length)
    support = np.linspace(0.0, 1.0, arr.size)
    return np.interp(positions, support, arr)


def znormalize(values: Sequence[float]) -> np.ndarray:
    """Zero-mean unit-variance form of a curve; a flat curve maps to zeros."""
    arr = np.asarray(list(values), dtype=float)
    std = float(arr.std())
    if std == 0.0:
        return np.zeros_like(arr)
    return (arr - arr.mean()) / std


@dataclass(frozen=True)
class CurveClusters:
    """k-medoids result: which curves are prototypes and who belongs where."""

    medoid_indices: tuple[int, ...]
    assignments: tuple[int, ...]
    inertia: float


def cluster_curves(
    curves: Sequence[Sequence[float]],
    k: int,
    resample_to: int | None = None,
) -> CurveClusters:
    """Group tension curves into ``k`` shape clusters by k-medoids.

    Curves are resampled to a common length (the median length by default)
    and z-normalized so only shape matters, then clustered with PAM (greedy
    build plus best-improvement swaps).  All ties break toward lower indices,
    making the result deterministic.  Assignment labels index into the sorted
    ``medoid_indices`` tuple.
    """
    n = len(curves)
    if n == 0:
        raise ValueError("no curves to cluster")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n)
    if resample_to is None:
        resample_to = max(1, int(round(float(np.median([len(c) for c in curves])))))
    prepared = np.stack([znormalize(resample_curve(c, resample_to)) for c in curves])
    diff = prepared[:, None, :] - prepared[None, :, :]
    distances = np.sqrt((diff * diff).sum(axis=-1))

    def cost(medoids: Sequence[int]) -> float:
        return float(distances[:, list(medoids)].min(axis=1).sum())

    medoids = [int(np.argmin(distances.sum(axis=1)))]
    while len(medoids) < k:
        best_candidate = None
        best_cost = math.inf
        for candidate in range(n):
            if candidate in medoids:
                continue
            trial = cost(medoids + [candidate])
            if trial < best_cost - 1e-12:
                best_cost = trial
                best_candidate = candidate
        assert best_candidate is not None
        medoids.append(best_candidate)

    current = cost(medoids)
    for _ in range(200):
        best_swap = None
        best_cost = current
        for m in sorted(medoids):
            others = [x for x in medoids if x != m]
            for h in range(n):
                if h in medoids:
                    continue
                trial = cost(others + [h])
                if trial < best_cost - 1e-12:
                    best_cost = trial
                    best_swap = (m, h)
        if best_swap is None:
            break
        medoids.remove(best_swap[0])
        medoids.append(best_swap[1])
        current = best_cost

    ordered = tuple(sorted(medoids))
    assignments = tuple(
        int(np.argmin(distances[i, list(ordered)])) for i in range(n)
    )
    return CurveClusters(ordered, assignments, current)


# ----------------------------------------------------------------------------
# curve serialization
# ----------------------------------------------------------------------------


def _format_tension(value: float) -> str:
    return f"{value:.9g}"


def curve_to_csv(curve: TensionCurve) -> str:
    """CSV with header ``bar_index,tension``; 9 significant digits per value."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bar_index", "tension"])
    for i, value in enumerate(curve.values):
        writer.writerow([i, _format_tension(value)])
    return out.getvalue()


def curve_from_csv(text: str) -> TensionCurve:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["bar_index", "tension"]:
        raise ValueError("expected CSV header 'bar_index,tension'")
    values: list[float] = []
    for row in reader:
        if not row or not "".join(row).strip():
            continue
        if len(row) < 2:
            raise ValueError(f"malformed curve row: {row!r}")
        index, value = int(row[0]), float(row[1])
        if index != len(values):
            raise ValueError(f"non-contiguous bar index {index}")
        values.append(value)
    return TensionCurve(tuple(values))


def curve_to_json(curve: TensionCurve, **metadata) -> str:
    """JSON form with values, silent flags, and caller-supplied metadata."""
    payload = {
        "bar_count": curve.bar_count,
        "values": [float(_format_tension(v)) for v in curve.values],
        "silent": list(curve.silent),
    }
    payload.update(metadata)
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def curve_from_json(text: str) -> TensionCurve:
    payload = json.loads(text)
    values = tuple(float(v) for v in payload["values"])
    silent = tuple(bool(s) for s in payload.get("silent", ()))
    return TensionCurve(values, silent if silent else ())


def load_curve_file(path: str) -> TensionCurve:
    """Load a curve from a .csv or .json file by extension."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return curve_from_json(text)
    return curve_from_csv(text)
