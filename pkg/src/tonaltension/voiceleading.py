"""Minimal voice leadings between pitch-class multisets and their tension.

A voice leading here is a covering pairing: every source occurrence and every
target occurrence appears in at least one (source, target) pair, with doubling
allowed when cardinalities differ.  ``minimal_vl`` returns the covering with
the smallest total displacement, where each pair costs its minimal mod-12
interval; cost ties resolve to the lexicographically smallest sorted pair
list.  ``vl_tension`` turns an optimal pairing into a scalar tension value by
combining each pair's semitone displacement with the perceptual distance of
the two pitch classes in tonal interval space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .tiv import DEFAULT_WEIGHTS, WeightProfile, euclidean_distance, pitch_class_tiv

VL_VARIANTS = ("monotone", "printed")

_MAX_COVER_SIDE = 16


@dataclass(frozen=True)
class VoiceAssignment:
    """An optimal covering: sorted (source_pc, target_pc) pairs and its cost."""

    pairs: tuple[tuple[int, int], ...]
    total_displacement: int

    @property
    def voice_count(self) -> int:
        return len(self.pairs)


def pc_interval(a: int, b: int) -> int:
    """Minimal mod-12 interval between two pitch classes, in 0..6."""
    d = abs(a - b) % 12
    return min(d, 12 - d)


def _normalize(pcs: Iterable[int], label: str) -> tuple[int, ...]:
    values = tuple(sorted(p % 12 for p in pcs))
    if not values:
        raise ValueError(f"{label} multiset is empty")
    return values


@lru_cache(maxsize=8192)
def _minimal_cover(source: tuple[int, ...], target: tuple[int, ...]) -> VoiceAssignment:
    # Covers decompose into stars: each source occurrence picks one primary
    # target, and any target left uncovered attaches to its cheapest source
    # (ties to the lowest source pc).  A subset-DP over covered targets finds
    # the optimum; (cost, sorted pair list) ordering makes ties canonical.
    n = len(target)
    if n > _MAX_COVER_SIDE:
        raise ValueError(f"target multiset too large for exact covering ({n} occurrences)")
    cost = [[pc_interval(a, b) for b in target] for a in source]

    full = (1 << n) - 1
    dp: dict[int, tuple[int, tuple[tuple[int, int], ...]]] = {0: (0, ())}
    for i, a in enumerate(source):
        row = cost[i]
        nxt: dict[int, tuple[int, tuple[tuple[int, int], ...]]] = {}
        for mask, (acc, pairs) in dp.items():
            for j, b in enumerate(target):
                new_mask = mask | (1 << j)
                cand = (acc + row[j], tuple(sorted(pairs + ((a, b),))))
                best = nxt.get(new_mask)
                if best is None or cand < best:
                    nxt[new_mask] = cand
        dp = nxt

    # Cheapest attachment per target occurrence, lex-smallest source on ties.
    attach: list[tuple[int, tuple[int, int]]] = []
    for j, b in enumerate(target):
        c, pair = min((cost[i][j], (a, b)) for i, a in enumerate(source))
        attach.append((c, pair))

    best_total: tuple[int, tuple[tuple[int, int], ...]] | None = None
    for mask, (acc, pairs) in dp.items():
        extra = 0
        extra_pairs = list(pairs)
        for j in range(n):
            if not mask & (1 << j):
                c, pair = attach[j]
                extra += c
                extra_pairs.append(pair)
        cand = (acc + extra, tuple(sorted(extra_pairs)))
        if best_total is None or cand < best_total:
            best_total = cand
    assert best_total is not None
    total, pairs = best_total
    return VoiceAssignment(pairs, total)


def minimal_vl(source: Iterable[int], target: Iterable[int]) -> VoiceAssignment:
    """Minimal covering voice leading between two pitch-class multisets.

    Every occurrence on each side is matched at least once; elements may be
    doubled to absorb cardinality differences.  Among minimal-cost coverings
    the lexicographically smallest sorted pair list is returned, which makes
    the result deterministic.
    """
    src = _normalize(source, "source")
    tgt = _normalize(target, "target")
    return _minimal_cover(src, tgt)


@lru_cache(maxsize=16)
def _pc_distance_table(weights: WeightProfile) -> tuple[tuple[float, ...], ...]:
    table = []
    for a in range(12):
        ta = pitch_class_tiv(a, weights)
        table.append(
            tuple(euclidean_distance(ta, pitch_class_tiv(b, weights)) for b in range(12))
        )
    return tuple(table)


def perceptual_note_distance(
    a: int, b: int, weights: WeightProfile = DEFAULT_WEIGHTS
) -> float:
    """Euclidean distance between the single-pitch-class TIVs of a and b.

    Unlike the raw semitone interval this follows tonal interval space, where
    e.g. a fifth is much closer than a semitone.
    """
    return _pc_distance_table(weights)[a % 12][b % 12]


def vl_tension(
    previous: Iterable[int],
    current: Iterable[int],
    variant: str = "monotone",
    weights: WeightProfile = DEFAULT_WEIGHTS,
) -> float:
    """Voice-leading tension between two pitch-class multisets.

    For each pair of the minimal covering, let s be its semitone displacement
    and mu the perceptual distance of its pitch classes.  The default
    'monotone' variant sums exp(0.05 * s * mu) - 1, which is zero for common
    tones and strictly increasing in both factors.  The 'printed' variant sums
    exp(1 / (0.05 * s * mu)) with common-tone pairs contributing 0; it is kept
    for comparison although it decreases as voices move further.
    """
    if variant not in VL_VARIANTS:
        raise ValueError(f"unknown voice-leading variant {variant!r}")
    assignment = minimal_vl(previous, current)
    table = _pc_distance_table(weights)
    total = 0.0
    for a, b in assignment.pairs:
        s = pc_interval(a, b)
        mu = table[a][b]
        product = 0.05 * s * mu
        if variant == "monotone":
            total += math.exp(product) - 1.0
        else:
            if product > 0.0:
                total += math.exp(1.0 / product)
    return total
