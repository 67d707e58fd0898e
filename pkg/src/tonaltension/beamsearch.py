"""Tension-guided stochastic beam search over token sequences.

Each step expands every live beam with up to ``beam_width`` nucleus samples,
ranks the pool by length-normalized log probability plus a diversity bonus,
and keeps the best ``beam_width``.  Whenever a beam closes a bar (by opening
the next one or emitting EOS) the pool is re-ranked again, this time adding
``tension_weight`` times the similarity between the beam's completed tension
curve and the matching prefix of the target curve.  Sampling is fully
deterministic: the generator for step s and beam position b derives from
``SeedSequence(seed, spawn_key=(s, b))``.

The search itself is agnostic about music; everything domain-specific lives
behind :class:`SearchHooks`.  :class:`MusicSearchHooks` supplies the standard
behaviour (per-bar controls, diversity statistics of note events, and bar
tension computed exactly as the analysis pipeline does).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .music import Bar, Key, TimeSignature, extract_chord_windows
from .tension import (
    SimilarityResult,
    TensionWeights,
    bar_tension,
    curve_similarity_detail,
    window_components,
)
from .tiv import DEFAULT_WEIGHTS, WeightProfile
from .tokens import ControlTokens, Vocabulary, decode

DIVERSITY_MODES = ("reference", "raw")
TOKENS_PER_BAR_BUDGET = 512


@dataclass(frozen=True)
class SearchParams:
    """Knobs of the beam search; defaults favour mild, controllable variety."""

    beam_width: int = 8
    nucleus_p: float = 0.9
    temperature: float = 0.9
    diversity_weight: float = 0.7
    tension_weight: float = 4.0
    variance_threshold: float = 0.001
    max_bars: int = 8
    final_candidates: int = 3
    seed: int = 0
    diversity_mode: str = "reference"
    scale_ref: float | None = None

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not 0.0 < self.nucleus_p <= 1.0:
            raise ValueError("nucleus_p must be in (0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.max_bars < 0:
            raise ValueError("max_bars must be >= 0")
        if self.final_candidates < 1:
            raise ValueError("final_candidates must be >= 1")
        if self.final_candidates > self.beam_width:
            raise ValueError("final_candidates cannot exceed beam_width")
        if self.diversity_mode not in DIVERSITY_MODES:
            raise ValueError(f"unknown diversity mode {self.diversity_mode!r}")
        if self.scale_ref is not None and self.scale_ref <= 0.0:
            raise ValueError("scale_ref must be positive")


@dataclass(frozen=True)
class DiversityMetrics:
    """Variety statistics of one bar, each in [0, 1]."""

    pitch_variety: float
    duration_variety: float
    pitch_entropy: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.pitch_variety, self.duration_variety, self.pitch_entropy)


EMPTY_METRICS = DiversityMetrics(0.0, 0.0, 0.0)


def metrics_from_notes(
    pitches: Sequence[int], durations: Sequence[int]
) -> DiversityMetrics:
    """Pitch/duration variety ratios and normalized pitch-trigram entropy."""
    n = len(pitches)
    if n == 0:
        return EMPTY_METRICS
    pv = len(set(pitches)) / n
    dv = len(set(durations)) / n
    trigrams = Counter(zip(pitches, pitches[1:], pitches[2:]))
    total = sum(trigrams.values())
    if total >= 2:
        h = -sum((c / total) * math.log(c / total) for c in trigrams.values())
        pe = h / math.log(total)
    else:
        pe = 0.0
    return DiversityMetrics(
        min(1.0, max(0.0, pv)), min(1.0, max(0.0, dv)), min(1.0, max(0.0, pe))
    )


def diversity_score(
    metrics: DiversityMetrics,
    reference: DiversityMetrics | None,
    mode: str = "reference",
) -> float:
    """Per-bar diversity bonus.

    'reference' rewards closeness to a reference bar's statistics, one point
    per dimension; without a reference (or in 'raw' mode) the raw statistics
    are summed, rewarding variety as such.
    """
    if mode not in DIVERSITY_MODES:
        raise ValueError(f"unknown diversity mode {mode!r}")
    if mode == "reference" and reference is not None:
        return sum(
            1.0 - abs(c - r)
            for c, r in zip(metrics.as_tuple(), reference.as_tuple())
        )
    return sum(metrics.as_tuple())


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


def nucleus_sample_k(
    logprobs: np.ndarray,
    k: int,
    p: float,
    temperature: float,
    rng: np.random.Generator,
) -> list[int]:
    """Up to ``k`` distinct token ids from the temperature-scaled nucleus.

    The nucleus is the smallest high-probability prefix whose mass reaches
    ``p`` (ties broken toward smaller ids).  If it holds at most ``k`` ids
    they are all returned; otherwise ``k`` are drawn without replacement with
    probability proportional to their scaled mass.  Returned ids are sorted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    lp = np.asarray(logprobs, dtype=float) / temperature
    total = _logsumexp(lp)
    if not math.isfinite(total):
        raise ValueError("distribution has no probability mass")
    probs = np.exp(lp - total)
    ids = np.arange(probs.size)
    order = np.lexsort((ids, -probs))
    ordered = probs[order]
    positive = ordered > 0.0
    order, ordered = order[positive], ordered[positive]
    cut = int(np.searchsorted(np.cumsum(ordered), p - 1e-12, side="left")) + 1
    cut = min(cut, order.size)
    nucleus_ids = order[:cut]
    nucleus_probs = ordered[:cut]
    if nucleus_ids.size <= k:
        return sorted(int(i) for i in nucleus_ids)
    weights = nucleus_probs / nucleus_probs.sum()
    picked = rng.choice(nucleus_ids, size=k, replace=False, p=weights)
    return sorted(int(i) for i in picked)


class SearchHooks(Protocol):
    """Domain callbacks the search driver needs."""

    bos_id: int
    bar_id: int
    eos_id: int

    def blocked_ids(self) -> Sequence[int]:
        """Ids that must never be sampled (conditioning-only tokens)."""
        ...

    def controls_for_bar(self, bar_index: int) -> ControlTokens | None: ...

    def reference_metrics(self, bar_index: int) -> DiversityMetrics | None: ...

    def segment_metrics(self, segment: Sequence[int]) -> DiversityMetrics: ...

    def initial_state(self) -> Any: ...

    def bar_tension(self, segment: Sequence[int], state: Any) -> tuple[float, Any]:
        """Tension of a completed bar segment plus the carried-over state."""
        ...


@dataclass
class BeamCandidate:
    """Mutable search state of one beam."""

    tokens: list[int]
    logprob: float = 0.0
    last_token_logprob: float = 0.0
    bar_starts: list[int] = field(default_factory=list)
    bars_completed: int = 0
    bar_tensions: list[float] = field(default_factory=list)
    similarity_trace: list[SimilarityResult] = field(default_factory=list)
    tension_state: Any = None
    pending_segment: tuple[int, ...] | None = None
    token_score: float = 0.0
    final_score: float = 0.0
    frozen: bool = False
    finished: bool = False

    @property
    def lm_norm(self) -> float:
        return self.logprob / max(1, len(self.tokens) - 1)

    def clone(self) -> BeamCandidate:
        return BeamCandidate(
            tokens=list(self.tokens),
            logprob=self.logprob,
            last_token_logprob=self.last_token_logprob,
            bar_starts=list(self.bar_starts),
            bars_completed=self.bars_completed,
            bar_tensions=list(self.bar_tensions),
            similarity_trace=list(self.similarity_trace),
            tension_state=self.tension_state,
            pending_segment=self.pending_segment,
            token_score=self.token_score,
            final_score=self.final_score,
            frozen=self.frozen,
            finished=self.finished,
        )


@dataclass(frozen=True)
class GenerationCandidate:
    """A finished candidate as returned to callers."""

    tokens: tuple[int, ...]
    logprob: float
    lm_norm: float
    final_score: float
    bar_tensions: tuple[float, ...]
    similarity_trace: tuple[SimilarityResult, ...]
    bars_completed: int
    finished: bool


def step_rng(seed: int, step: int, position: int) -> np.random.Generator:
    """The deterministic generator used at (step, beam position)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(step, position)))
    )


def _similarity(
    candidate: BeamCandidate,
    targets: Sequence[float] | None,
    params: SearchParams,
) -> SimilarityResult | None:
    if targets is None or params.tension_weight == 0.0:
        return None
    n = len(candidate.bar_tensions)
    if n == 0:
        return None
    return curve_similarity_detail(
        candidate.bar_tensions,
        targets[:n],
        params.variance_threshold,
        params.scale_ref,
    )


def _final_score(
    candidate: BeamCandidate,
    targets: Sequence[float] | None,
    params: SearchParams,
) -> float:
    score = candidate.lm_norm
    result = _similarity(candidate, targets, params)
    if result is not None:
        score += params.tension_weight * result.value
    return score


def generate(
    model,
    hooks: SearchHooks,
    params: SearchParams = SearchParams(),
    tension_targets: Sequence[float] | None = None,
) -> list[GenerationCandidate]:
    """Run the search and return the top ``final_candidates`` candidates.

    ``tension_targets`` must cover ``max_bars`` values when given; passing
    None (or ``tension_weight`` 0) disables tension guidance entirely, and
    ``diversity_weight`` 0 skips the diversity bonus.
    """
    targets: list[float] | None = None
    if tension_targets is not None:
        targets = [float(t) for t in tension_targets]
        if len(targets) < params.max_bars:
            raise ValueError(
                f"target curve has {len(targets)} bars, need {params.max_bars}"
            )

    root = BeamCandidate(tokens=[hooks.bos_id], tension_state=hooks.initial_state())
    beams = [root]
    if params.max_bars == 0:
        root.frozen = True
        return _finalize(beams, targets, params)

    blocked = list(hooks.blocked_ids())
    budget = params.max_bars * TOKENS_PER_BAR_BUDGET
    for step in range(budget):
        if all(beam.frozen for beam in beams):
            break
        pool: list[BeamCandidate] = []
        for position, beam in enumerate(beams):
            if beam.frozen:
                pool.append(beam)
                continue
            open_bar = max(0, len(beam.bar_starts) - 1)
            controls = hooks.controls_for_bar(open_bar)
            logprobs = np.asarray(
                model.next_token_logprobs(beam.tokens, controls), dtype=float
            )
            masked = logprobs
            if blocked:
                masked = logprobs.copy()
                masked[blocked] = -np.inf
            rng = step_rng(params.seed, step, position)
            picks = nucleus_sample_k(
                masked, params.beam_width, params.nucleus_p, params.temperature, rng
            )
            for token_id in picks:
                pool.append(
                    _expand(beam, token_id, float(logprobs[token_id]), hooks, params)
                )
        order = sorted(range(len(pool)), key=lambda i: (-pool[i].token_score, i))
        beams = [pool[i] for i in order[: params.beam_width]]

        if any(beam.pending_segment is not None for beam in beams):
            for beam in beams:
                if beam.pending_segment is None:
                    continue
                value, state = hooks.bar_tension(beam.pending_segment, beam.tension_state)
                beam.bar_tensions.append(value)
                beam.tension_state = state
                beam.bars_completed += 1
                beam.pending_segment = None
                if beam.bars_completed >= params.max_bars and not beam.frozen:
                    # drop the marker that would have opened a bar past the limit
                    if beam.tokens[-1] == hooks.bar_id:
                        beam.tokens.pop()
                        beam.bar_starts.pop()
                        beam.logprob -= beam.last_token_logprob
                    beam.frozen = True
                result = _similarity(beam, targets, params)
                if result is not None:
                    beam.similarity_trace.append(result)
            for beam in beams:
                beam.final_score = _final_score(beam, targets, params)
            order = sorted(range(len(beams)), key=lambda i: (-beams[i].final_score, i))
            beams = [beams[i] for i in order[: params.beam_width]]

    return _finalize(beams, targets, params)


def _expand(
    beam: BeamCandidate,
    token_id: int,
    logprob: float,
    hooks: SearchHooks,
    params: SearchParams,
) -> BeamCandidate:
    child = beam.clone()
    child.tokens.append(token_id)
    child.logprob += logprob
    child.last_token_logprob = logprob
    if token_id == hooks.bar_id:
        if child.bar_starts:
            child.pending_segment = tuple(child.tokens[child.bar_starts[-1] : -1])
        child.bar_starts.append(len(child.tokens) - 1)
    elif token_id == hooks.eos_id:
        child.finished = True
        child.frozen = True
        if child.bar_starts:
            child.pending_segment = tuple(child.tokens[child.bar_starts[-1] : -1])
    score = child.lm_norm
    if params.diversity_weight != 0.0:
        seg_start = child.bar_starts[-1] if child.bar_starts else 0
        metrics = hooks.segment_metrics(tuple(child.tokens[seg_start:]))
        reference = hooks.reference_metrics(max(0, len(child.bar_starts) - 1))
        score += params.diversity_weight * diversity_score(
            metrics, reference, params.diversity_mode
        )
    child.token_score = score
    return child


def _finalize(
    beams: list[BeamCandidate],
    targets: Sequence[float] | None,
    params: SearchParams,
) -> list[GenerationCandidate]:
    for beam in beams:
        beam.final_score = _final_score(beam, targets, params)
    order = sorted(range(len(beams)), key=lambda i: (-beams[i].final_score, i))
    results = []
    for i in order[: params.final_candidates]:
        beam = beams[i]
        results.append(
            GenerationCandidate(
                tokens=tuple(beam.tokens),
                logprob=beam.logprob,
                lm_norm=beam.lm_norm,
                final_score=beam.final_score,
                bar_tensions=tuple(beam.bar_tensions),
                similarity_trace=tuple(beam.similarity_trace),
                bars_completed=beam.bars_completed,
                finished=beam.finished,
            )
        )
    return results


# ----------------------------------------------------------------------------
# music hooks
# ----------------------------------------------------------------------------


class MusicSearchHooks:
    """Standard hooks: controls per bar, note-level diversity, TIS tension.

    Bar tension is computed with the exact same window components as the
    analysis pipeline, threading the previous chord window across bars, so a
    generated piece re-analysed bar by bar reproduces the scores the search
    used.  Segment parsing, metrics, and tension are cached per segment.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        key: Key = Key(0, "major"),
        *,
        controls: Sequence[ControlTokens] | None = None,
        reference_ids: Sequence[int] | None = None,
        tension_weights: TensionWeights = TensionWeights(),
        tiv_weights: WeightProfile = DEFAULT_WEIGHTS,
        window_policy: str = "beat",
        vl_variant: str = "monotone",
        chroma_weighting: str = "duration",
        ticks_per_quarter: int = 480,
    ) -> None:
        self.vocab = vocab
        self.bos_id = vocab.bos_id
        self.bar_id = vocab.bar_id
        self.eos_id = vocab.eos_id
        self.key = key
        self.controls = tuple(controls) if controls else None
        self.tension_weights = tension_weights
        self.tiv_weights = tiv_weights
        self.window_policy = window_policy
        self.vl_variant = vl_variant
        self.chroma_weighting = chroma_weighting
        self.ticks_per_quarter = ticks_per_quarter
        blocked = {vocab.bos_id}
        blocked.update(vocab.ids_of_kind("Density"))
        blocked.update(vocab.ids_of_kind("Tension"))
        self._blocked = tuple(sorted(blocked))
        self._bar_cache: dict[tuple[int, ...], Bar] = {}
        self._metrics_cache: dict[tuple[int, ...], DiversityMetrics] = {}
        self._tension_cache: dict[tuple, tuple[float, Any]] = {}
        self._reference = self._reference_bar_metrics(reference_ids)

    def _reference_bar_metrics(
        self, reference_ids: Sequence[int] | None
    ) -> tuple[DiversityMetrics, ...] | None:
        if reference_ids is None:
            return None
        ids = list(reference_ids)
        starts = [i for i, t in enumerate(ids) if t == self.bar_id]
        metrics = []
        for j, start in enumerate(starts):
            end = starts[j + 1] if j + 1 < len(starts) else len(ids)
            segment = [t for t in ids[start:end] if t != self.eos_id]
            metrics.append(self.segment_metrics(tuple(segment)))
        return tuple(metrics) if metrics else None

    def blocked_ids(self) -> Sequence[int]:
        return self._blocked

    def controls_for_bar(self, bar_index: int) -> ControlTokens | None:
        if not self.controls:
            return None
        return self.controls[min(bar_index, len(self.controls) - 1)]

    def reference_metrics(self, bar_index: int) -> DiversityMetrics | None:
        if not self._reference:
            return None
        return self._reference[min(bar_index, len(self._reference) - 1)]

    def _segment_bar(self, segment: tuple[int, ...]) -> Bar:
        bar = self._bar_cache.get(segment)
        if bar is None:
            ids = [self.bos_id, *segment, self.eos_id]
            piece = decode(
                ids, self.vocab, self.ticks_per_quarter, strict=False, warnings_out=[]
            )
            if piece.bars:
                bar = piece.bars[0]
            else:
                span = TimeSignature(4, 4).span_ticks(self.ticks_per_quarter)
                bar = Bar(0, 0, span, TimeSignature(4, 4), ())
            self._bar_cache[segment] = bar
        return bar

    def segment_metrics(self, segment: Sequence[int]) -> DiversityMetrics:
        key = tuple(segment)
        metrics = self._metrics_cache.get(key)
        if metrics is None:
            bar = self._segment_bar(key)
            ordered = sorted(bar.notes, key=lambda n: (n.onset, n.pitch, n.instrument))
            metrics = metrics_from_notes(
                [n.pitch for n in ordered], [n.duration for n in ordered]
            )
            self._metrics_cache[key] = metrics
        return metrics

    def initial_state(self) -> Any:
        return None

    def bar_tension(self, segment: Sequence[int], state: Any) -> tuple[float, Any]:
        cache_key = (tuple(segment), state)
        cached = self._tension_cache.get(cache_key)
        if cached is None:
            bar = self._segment_bar(cache_key[0])
            windows = extract_chord_windows(bar, self.window_policy)
            components, carried = window_components(
                windows,
                state,
                self.key,
                self.tension_weights,
                vl_variant=self.vl_variant,
                tiv_weights=self.tiv_weights,
                chroma_weighting=self.chroma_weighting,
            )
            cached = (bar_tension(components), carried)
            self._tension_cache[cache_key] = cached
        return cached
