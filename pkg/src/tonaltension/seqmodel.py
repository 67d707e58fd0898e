"""Sequence models over token ids and their serialized bundle format.

Every model exposes ``next_token_logprobs(context, controls)`` returning a
full-vocabulary log distribution that sums to one.  Conditioning splices the
per-bar control ids right after the most recent bar marker, which is exactly
where they sit in training streams, so conditioned contexts look the same
during counting and during generation.

The n-gram model uses additive smoothing over the generable subset of the
vocabulary (everything except BOS and the density/tension conditioning
tokens); unseen contexts therefore fall back to a uniform distribution.
Trained models ship as a single canonical JSON bundle together with the
tokenizer configuration and the corpus bucket edges, so one file is enough to
reproduce generation byte for byte.

:class:`ExternalBridgeModel` forwards the same contract to a subprocess
speaking line-delimited JSON, which lets heavyweight predictors live outside
this package.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .tokens import BucketEdges, ControlTokens, TokenizerConfig, Vocabulary

MODEL_CONTEXT_CAP = 256
DEFAULT_SMOOTHING = 0.01
BUNDLE_FORMAT_VERSION = 1
BRIDGE_PROTOCOL_VERSION = 1


@runtime_checkable
class SequenceModel(Protocol):
    """Anything that predicts a next-token log distribution."""

    vocab: Vocabulary

    def next_token_logprobs(
        self, context: Sequence[int], controls: ControlTokens | None = None
    ) -> np.ndarray: ...


def conditioned_stream(
    ids: Sequence[int], controls: Sequence[ControlTokens] | None, vocab: Vocabulary
) -> list[int]:
    """Insert each bar's control ids after its bar marker.

    With ``controls=None`` the stream is returned unchanged.  The number of
    control blocks must match the number of bar markers.
    """
    if controls is None:
        return list(ids)
    out: list[int] = []
    bar_index = 0
    for token_id in ids:
        out.append(token_id)
        if token_id == vocab.bar_id:
            if bar_index >= len(controls):
                raise ValueError("fewer control blocks than bars")
            out.extend(controls[bar_index].token_ids(vocab))
            bar_index += 1
    if bar_index != len(controls):
        raise ValueError("more control blocks than bars")
    return out


def conditioned_context(
    context: Sequence[int],
    controls: ControlTokens | None,
    vocab: Vocabulary,
    length: int,
) -> tuple[int, ...]:
    """The last ``length`` ids seen by a model, BOS-padded on the left.

    Current-bar controls are inserted after the most recent bar marker; a
    context with no bar marker yet is used as-is.
    """
    ids = list(context)[-MODEL_CONTEXT_CAP:]
    if controls is not None:
        for i in range(len(ids) - 1, -1, -1):
            if ids[i] == vocab.bar_id:
                ids[i + 1 : i + 1] = controls.token_ids(vocab)
                break
    if len(ids) < length:
        ids = [vocab.bos_id] * (length - len(ids)) + ids
    return tuple(ids[-length:])


def _generable_ids(vocab: Vocabulary) -> tuple[int, ...]:
    blocked = {vocab.bos_id}
    blocked.update(vocab.ids_of_kind("Density"))
    blocked.update(vocab.ids_of_kind("Tension"))
    return tuple(i for i in range(len(vocab)) if i not in blocked)


class UniformModel:
    """Maximum-entropy baseline: every token equally likely everywhere."""

    def __init__(self, vocab: Vocabulary) -> None:
        self.vocab = vocab
        logp = np.full(len(vocab), -math.log(len(vocab)))
        logp.flags.writeable = False
        self._logp = logp

    def next_token_logprobs(
        self, context: Sequence[int], controls: ControlTokens | None = None
    ) -> np.ndarray:
        return self._logp


class NGramModel:
    """Add-k smoothed n-gram over token ids.

    ``order`` is the context length: the model conditions on the previous
    ``order`` tokens.  Counts map a context tuple to ``{next_id: count}``.
    Returned arrays are cached and marked read-only.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        counts: dict[tuple[int, ...], dict[int, int]] | None = None,
        smoothing: float = DEFAULT_SMOOTHING,
    ) -> None:
        if order < 1:
            raise ValueError("order must be >= 1")
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self.vocab = vocab
        self.order = order
        self.smoothing = smoothing
        self.counts = counts if counts is not None else {}
        self._support = np.asarray(_generable_ids(vocab))
        self._cache: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def support_size(self) -> int:
        return int(self._support.size)

    def _distribution(self, ctx: tuple[int, ...]) -> np.ndarray:
        cached = self._cache.get(ctx)
        if cached is not None:
            return cached
        if len(self._cache) > 65536:
            self._cache.clear()
        k = self.smoothing
        seen = self.counts.get(ctx, {})
        total = sum(seen.values())
        denom = math.log(total + k * self._support.size)
        logp = np.full(len(self.vocab), -np.inf)
        logp[self._support] = math.log(k) - denom
        for token_id, count in seen.items():
            logp[token_id] = math.log(count + k) - denom
        logp.flags.writeable = False
        self._cache[ctx] = logp
        return logp

    def next_token_logprobs(
        self, context: Sequence[int], controls: ControlTokens | None = None
    ) -> np.ndarray:
        ctx = conditioned_context(context, controls, self.vocab, self.order)
        return self._distribution(ctx)


def train_ngram(
    corpus: Sequence[tuple[Sequence[int], Sequence[ControlTokens] | None]],
    vocab: Vocabulary,
    order: int,
    smoothing: float = DEFAULT_SMOOTHING,
) -> NGramModel:
    """Count transitions over (token ids, per-bar controls) pairs.

    Targets outside the generable set (BOS, density, tension) are not
    counted; they only ever occur as conditioning context.
    """
    model = NGramModel(vocab, order, smoothing=smoothing)
    generable = set(_generable_ids(vocab))
    bos = vocab.bos_id
    for ids, controls in corpus:
        stream = conditioned_stream(ids, controls, vocab)
        for i in range(1, len(stream)):
            target = stream[i]
            if target not in generable:
                continue
            ctx = stream[max(0, i - order) : i]
            if len(ctx) < order:
                ctx = [bos] * (order - len(ctx)) + ctx
            bucket = model.counts.setdefault(tuple(ctx), {})
            bucket[target] = bucket.get(target, 0) + 1
    return model


# ----------------------------------------------------------------------------
# bundle serialization
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelBundle:
    """A trained model plus everything needed to run generation."""

    config: TokenizerConfig
    vocab: Vocabulary
    model: NGramModel
    density_edges: BucketEdges
    tension_edges: BucketEdges
    similarity_scale: float


def bundle_to_json(bundle: ModelBundle) -> str:
    counts = {
        ",".join(str(t) for t in ctx): {str(k): v for k, v in sorted(next_counts.items())}
        for ctx, next_counts in bundle.model.counts.items()
    }
    payload = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "kind": "ngram",
        "order": bundle.model.order,
        "smoothing": bundle.model.smoothing,
        "tokenizer": bundle.config.to_dict(),
        "vocabulary_size": len(bundle.vocab),
        "density_edges": list(bundle.density_edges.edges),
        "tension_edges": list(bundle.tension_edges.edges),
        "similarity_scale": bundle.similarity_scale,
        "counts": counts,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def bundle_from_json(text: str) -> ModelBundle:
    data = json.loads(text)
    version = data.get("format_version")
    if version != BUNDLE_FORMAT_VERSION:
        raise ValueError(f"unsupported bundle format version {version!r}")
    if data.get("kind") != "ngram":
        raise ValueError(f"unsupported model kind {data.get('kind')!r}")
    config = TokenizerConfig.from_dict(data["tokenizer"])
    vocab = Vocabulary(config)
    if data["vocabulary_size"] != len(vocab):
        raise ValueError(
            f"bundle vocabulary size {data['vocabulary_size']} does not match "
            f"the configured vocabulary ({len(vocab)})"
        )
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    for ctx_key, next_counts in data["counts"].items():
        ctx = tuple(int(t) for t in ctx_key.split(",")) if ctx_key else ()
        counts[ctx] = {int(k): int(v) for k, v in next_counts.items()}
    model = NGramModel(vocab, int(data["order"]), counts, float(data["smoothing"]))
    return ModelBundle(
        config=config,
        vocab=vocab,
        model=model,
        density_edges=BucketEdges(tuple(float(e) for e in data["density_edges"])),
        tension_edges=BucketEdges(tuple(float(e) for e in data["tension_edges"])),
        similarity_scale=float(data["similarity_scale"]),
    )


def save_bundle(path: str, bundle: ModelBundle) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(bundle_to_json(bundle))


def load_bundle(path: str) -> ModelBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return bundle_from_json(fh.read())


# ----------------------------------------------------------------------------
# external predictor bridge
# ----------------------------------------------------------------------------


class BridgeError(RuntimeError):
    """Raised when the external predictor misbehaves (bad reply, timeout, exit)."""


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


def controls_to_json(controls: ControlTokens | None) -> dict | None:
    if controls is None:
        return None
    num, den = controls.time_signature
    return {
        "timesig": f"{num}/{den}",
        "instruments": list(controls.instruments),
        "density": controls.density_bin,
        "tension": controls.tension_bin,
    }


def controls_from_json(data: dict | None) -> ControlTokens | None:
    if data is None:
        return None
    num, den = data["timesig"].split("/")
    return ControlTokens(
        time_signature=(int(num), int(den)),
        instruments=tuple(int(i) for i in data["instruments"]),
        density_bin=int(data["density"]),
        tension_bin=int(data["tension"]),
    )


class ExternalBridgeModel:
    """Next-token predictions served by a subprocess over JSON lines.

    Request::

        {"v": 1, "id": 7, "context": [0, 2, ...], "controls": {...} | null}

    Reply::

        {"v": 1, "id": 7, "topk": [[id, logprob], ...], "rest_logprob": x}

    The remaining probability mass is spread uniformly over ids absent from
    ``topk``.  Replies whose total mass exceeds one (beyond rounding), with
    out-of-range ids, mismatched request ids, or that take longer than the
    timeout raise :class:`BridgeError`.  The distribution is renormalized
    before being returned.
    """

    def __init__(
        self,
        command: str | Sequence[str],
        vocab: Vocabulary,
        timeout: float = 30.0,
    ) -> None:
        self.vocab = vocab
        self.timeout = timeout
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeError(f"could not start bridge process: {exc}") from exc
        self._request_id = 0
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5.0)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()

    def __enter__(self) -> ExternalBridgeModel:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def next_token_logprobs(
        self, context: Sequence[int], controls: ControlTokens | None = None
    ) -> np.ndarray:
        self._request_id += 1
        request = {
            "v": BRIDGE_PROTOCOL_VERSION,
            "id": self._request_id,
            "context": [int(t) for t in list(context)[-MODEL_CONTEXT_CAP:]],
            "controls": controls_to_json(controls),
        }
        if self._proc.poll() is not None or self._proc.stdin is None:
            raise BridgeError("bridge process is not running")
        try:
            self._proc.stdin.write(json.dumps(request, separators=(",", ":")) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BridgeError(f"could not write to bridge: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BridgeError(f"bridge timed out after {self.timeout:.0f}s") from None
        if line is None:
            raise BridgeError("bridge closed its output stream")
        return self._parse_reply(line)

    def _parse_reply(self, line: str) -> np.ndarray:
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"bridge sent invalid JSON: {exc}") from exc
        if not isinstance(reply, dict) or reply.get("v") != BRIDGE_PROTOCOL_VERSION:
            raise BridgeError(f"unsupported bridge protocol in reply: {reply!r}")
        if reply.get("id") != self._request_id:
            raise BridgeError(
                f"bridge reply id {reply.get('id')!r} does not match "
                f"request id {self._request_id}"
            )
        topk = reply.get("topk")
        if not isinstance(topk, list):
            raise BridgeError("bridge reply has no topk list")
        size = len(self.vocab)
        logp = np.full(size, -np.inf)
        seen: set[int] = set()
        for entry in topk:
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                raise BridgeError(f"malformed topk entry {entry!r}")
            token_id, lp = int(entry[0]), float(entry[1])
            if not 0 <= token_id < size:
                raise BridgeError(f"topk id {token_id} outside vocabulary")
            if token_id in seen:
                raise BridgeError(f"duplicate topk id {token_id}")
            seen.add(token_id)
            logp[token_id] = lp
        rest = reply.get("rest_logprob")
        if rest is None:
            rest = -math.inf
        rest = float(rest)
        remaining = size - len(seen)
        if remaining and math.isfinite(rest):
            mask = np.isneginf(logp)
            logp[mask] = rest
        total = _logsumexp(logp)
        if not math.isfinite(total):
            raise BridgeError("bridge reply carries no probability mass")
        if total > 1e-6:
            raise BridgeError(f"bridge reply mass exp({total:.3g}) exceeds one")
        return logp - total
