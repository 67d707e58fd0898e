"""Evaluation metrics comparing generated pieces against references.

Structural metrics work bar by bar: instrumentation F1, note-density bucket
accuracy, and groove similarity over binary onset grids (percussion
excluded).  F1 and density accuracy insist on equal bar counts; groove
tolerates different lengths and averages over the shared prefix.  Tension
agreement reuses :func:`tonaltension.tension.curve_similarity`; batch
summaries follow the usual reporting convention of dropping pairs whose
target curve is flat and pairs with negative correlation before averaging.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .music import Bar, Piece
from .tension import SimilarityResult, curve_similarity_detail
from .tokens import BucketEdges


def _paired_bars(a: Piece, b: Piece) -> list[tuple[Bar, Bar]]:
    if a.bar_count != b.bar_count:
        raise ValueError(
            f"bar counts differ: {a.bar_count} generated vs {b.bar_count} reference"
        )
    return list(zip(a.bars, b.bars))


def _bar_instruments(bar: Bar, exclude: frozenset[int]) -> set[int]:
    return {n.instrument for n in bar.notes if n.track not in exclude}


def instrument_f1(generated: Piece, reference: Piece) -> float:
    """Mean per-bar F1 between instrument sets; two empty bars count as 1."""
    pairs = _paired_bars(generated, reference)
    if not pairs:
        return 1.0
    scores = []
    for gen_bar, ref_bar in pairs:
        gen = _bar_instruments(gen_bar, generated.percussion_tracks)
        ref = _bar_instruments(ref_bar, reference.percussion_tracks)
        if not gen and not ref:
            scores.append(1.0)
        elif not gen or not ref:
            scores.append(0.0)
        else:
            scores.append(2.0 * len(gen & ref) / (len(gen) + len(ref)))
    return float(np.mean(scores))


def _bar_density(bar: Bar, exclude: frozenset[int]) -> int:
    return sum(1 for n in bar.notes if n.track not in exclude)


def density_accuracy(
    generated: Piece, reference: Piece, edges: BucketEdges
) -> float:
    """Fraction of bars whose note-count bucket matches the reference's."""
    pairs = _paired_bars(generated, reference)
    if not pairs:
        return 1.0
    hits = sum(
        1
        for gen_bar, ref_bar in pairs
        if edges.bucket_of(float(_bar_density(gen_bar, generated.percussion_tracks)))
        == edges.bucket_of(float(_bar_density(ref_bar, reference.percussion_tracks)))
    )
    return hits / len(pairs)


def bar_onset_grid(
    bar: Bar, grid_ticks: int, exclude_tracks: frozenset[int] = frozenset()
) -> np.ndarray:
    """Binary vector with a 1 at every grid position holding an onset."""
    steps = bar.span // grid_ticks
    out = np.zeros(steps, dtype=int)
    for note in bar.notes:
        if note.track in exclude_tracks:
            continue
        position = (note.onset - bar.start_tick) // grid_ticks
        if 0 <= position < steps:
            out[position] = 1
    return out


def groove_similarity(
    generated: Piece, reference: Piece, positions_per_quarter: int = 4
) -> float:
    """Mean per-bar onset-grid agreement: 1 - Hamming distance / grid size.

    Bars pair up positionally over the shorter piece; grids are truncated to
    the shorter of the two bars (meters can differ) and percussion is left
    out on both sides.  Both pieces must contain at least one bar.
    """
    if generated.bar_count == 0 or reference.bar_count == 0:
        raise ValueError("groove similarity needs at least one bar on each side")
    pairs = list(zip(generated.bars, reference.bars))
    gen_grid_ticks = generated.ticks_per_quarter // positions_per_quarter
    ref_grid_ticks = reference.ticks_per_quarter // positions_per_quarter
    if gen_grid_ticks < 1 or ref_grid_ticks < 1:
        raise ValueError("resolution below one tick per grid position")
    scores = []
    for gen_bar, ref_bar in pairs:
        gen = bar_onset_grid(gen_bar, gen_grid_ticks, generated.percussion_tracks)
        ref = bar_onset_grid(ref_bar, ref_grid_ticks, reference.percussion_tracks)
        size = min(gen.size, ref.size)
        if size == 0:
            scores.append(1.0)
            continue
        hamming = int(np.sum(gen[:size] != ref[:size]))
        scores.append(1.0 - hamming / size)
    return float(np.mean(scores))


def tension_correlation(
    candidate: Sequence[float],
    target: Sequence[float],
    variance_threshold: float = 0.001,
    scale_ref: float | None = None,
) -> SimilarityResult:
    """Curve similarity between a candidate curve and its same-length target."""
    if len(candidate) != len(target):
        raise ValueError(
            f"curve lengths differ: {len(candidate)} candidate vs {len(target)} target"
        )
    if len(candidate) == 0:
        raise ValueError("cannot compare empty curves")
    return curve_similarity_detail(
        list(candidate), list(target), variance_threshold, scale_ref
    )


@dataclass(frozen=True)
class TensionEvalSummary:
    """Aggregate of tension correlations over many candidate/target pairs."""

    considered: int
    kept: int
    mean: float | None
    median: float | None
    correlations: tuple[float, ...]


def tension_evaluation(
    pairs: Sequence[tuple[Sequence[float], Sequence[float]]],
    variance_threshold: float = 0.001,
    scale_ref: float | None = None,
) -> TensionEvalSummary:
    """Summary of curve agreement across pairs of (candidate, target) curves.

    Pairs whose target curve does not move (variance at or below the
    threshold) and pairs with negative similarity are excluded from the mean
    and median, mirroring how correlation-based listening studies report
    agreement.  The kept values are returned for inspection.
    """
    kept: list[float] = []
    considered = 0
    for candidate, target in pairs:
        n = min(len(candidate), len(target))
        if n == 0:
            continue
        considered += 1
        tgt = np.asarray(list(target)[:n], dtype=float)
        if float(np.var(tgt)) <= variance_threshold:
            continue
        value = curve_similarity_detail(
            list(candidate)[:n], tgt, variance_threshold, scale_ref
        ).value
        if value < 0.0:
            continue
        kept.append(value)
    return TensionEvalSummary(
        considered=considered,
        kept=len(kept),
        mean=float(np.mean(kept)) if kept else None,
        median=float(statistics.median(kept)) if kept else None,
        correlations=tuple(kept),
    )


def evaluate_piece_pair(
    generated: Piece,
    reference: Piece,
    density_edges: BucketEdges,
    positions_per_quarter: int = 4,
) -> dict[str, float]:
    """The three structural metrics for one generated/reference pair."""
    return {
        "instrument_f1": instrument_f1(generated, reference),
        "density_accuracy": density_accuracy(generated, reference, density_edges),
        "groove_similarity": groove_similarity(
            generated, reference, positions_per_quarter
        ),
    }
