"""Command-line interface.

Subcommands: ``analyze`` (tension curve, chord-level breakdown, and key of a
MIDI file), ``train`` (fit a model bundle on a corpus of files or
directories), ``generate`` (tension-guided beam search from a bundle, a
target curve, and a reference piece), ``evaluate`` (generated pieces against
reference pieces, paired one-to-one), and ``curves`` (cluster corpus curves
into prototype target curves ready for ``generate``).

Exit codes: 0 success, 2 usage or input problems (bad files, no chordal
content, unknown config keys, count mismatches), 3 external-bridge failures,
1 anything else.  A JSON config file passed with ``--config`` supplies
defaults; explicit flags always win.  Setting ``TONALTENSION_BRIDGE`` routes
generation through an external predictor process.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .beamsearch import MusicSearchHooks, SearchParams
from .beamsearch import generate as beam_generate
from .evalmetrics import (
    evaluate_piece_pair,
    tension_correlation,
    tension_evaluation,
)
from .midifile import (
    MidiParseError,
    filter_chord_tracks,
    parse_midi_file,
    write_midi_file,
)
from .music import Key, PC_NAMES, Piece, WINDOW_POLICIES, CHROMA_WEIGHTINGS
from .seqmodel import (
    BridgeError,
    ExternalBridgeModel,
    ModelBundle,
    load_bundle,
    save_bundle,
    train_ngram,
)
from .svgplot import render_curves_svg
from .tension import (
    DEFAULT_SIMILARITY_SCALE,
    TensionCurve,
    TensionWeights,
    cluster_curves,
    curve_to_csv,
    estimate_key,
    load_curve_file,
    piece_tension_components,
    resample_curve,
    znormalize,
)
from .tokens import (
    ControlTokens,
    TokenizerConfig,
    Vocabulary,
    build_bucket_edges,
    control_tokens_for_bar,
    control_tokens_for_piece,
    decode,
    encode,
    quantize_piece,
)
from .voiceleading import VL_VARIANTS

BRIDGE_ENV_VAR = "TONALTENSION_BRIDGE"

CONFIG_DEFAULTS: dict[str, object] = {
    "seed": 0,
    "bars": 8,
    "beam_width": 8,
    "nucleus_p": 0.9,
    "temperature": 0.9,
    "diversity_weight": 0.7,
    "tension_weight": 4.0,
    "variance_threshold": 0.001,
    "diversity_mode": "reference",
    "vl_variant": "monotone",
    "weights": "1,1,1,30.3,2.71",
    "window_policy": "beat",
    "chroma_weighting": "duration",
    "min_polyphony_ratio": 0.3,
    "max_norm": "analytic",
    "order": 3,
    "smoothing": 0.01,
    "candidates": 3,
    "key": None,
    "key_window_bars": None,
    "clusters": 4,
}


class UserError(Exception):
    """Input or usage problem attributable to the caller (exit code 2)."""


def parse_key(text: str) -> Key:
    """'C:major', 'f#:minor', or '10:minor' -> Key."""
    parts = text.split(":")
    if len(parts) != 2:
        raise UserError(f"key must look like C:major, got {text!r}")
    tonic_text, mode = parts[0].strip(), parts[1].strip().lower()
    if mode not in ("major", "minor"):
        raise UserError(f"mode must be major or minor, got {mode!r}")
    names = [n.lower() for n in PC_NAMES]
    if tonic_text.lower() in names:
        tonic = names.index(tonic_text.lower())
    else:
        try:
            tonic = int(tonic_text)
        except ValueError:
            raise UserError(f"unknown tonic {tonic_text!r}") from None
        if not 0 <= tonic <= 11:
            raise UserError(f"tonic {tonic} outside 0..11")
    return Key(tonic, mode)


def parse_weights(text: str) -> TensionWeights:
    parts = text.split(",")
    if len(parts) != 5:
        raise UserError(f"--weights needs 5 comma-separated values, got {len(parts)}")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise UserError(f"bad weight value: {exc}") from None
    return TensionWeights(*values)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UserError(f"could not read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UserError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - set(CONFIG_DEFAULTS))
    if unknown:
        raise UserError(f"unknown config keys: {', '.join(unknown)}")
    return data


def setting(args: argparse.Namespace, config: dict, key: str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return CONFIG_DEFAULTS[key]


def _read_piece(path: str):
    try:
        return parse_midi_file(path)
    except FileNotFoundError:
        raise UserError(f"no such file: {path}") from None
    except (MidiParseError, OSError, ValueError) as exc:
        raise UserError(f"could not read {path}: {exc}") from exc


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


MIDI_SUFFIXES = (".mid", ".midi")


def _expand_midi_inputs(paths: list[str]) -> list[str]:
    """Flatten files and directories into a deterministic list of MIDI paths.

    Directories contribute their *.mid / *.midi entries in sorted order; a
    directory without any is an input error, as is a missing path.
    """
    out: list[str] = []
    for path in paths:
        p = Path(path)
        if p.is_dir():
            found = sorted(
                str(c) for c in p.iterdir() if c.suffix.lower() in MIDI_SUFFIXES
            )
            if not found:
                raise UserError(f"{path}: directory contains no MIDI files")
            out.extend(found)
        elif p.exists():
            out.append(path)
        else:
            raise UserError(f"no such file: {path}")
    return out


def _bar_prefix(piece: Piece, bars: int) -> Piece:
    """The first ``bars`` bars of a piece, tempo map trimmed to match."""
    if bars >= piece.bar_count:
        return piece
    kept = piece.bars[:bars]
    end = kept[-1].start_tick + kept[-1].span if kept else 0
    return dataclasses.replace(
        piece,
        bars=kept,
        tempo_events=tuple(e for e in piece.tempo_events if e[0] < end),
    )


# ----------------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------------


def _polyphony_ratio(args: argparse.Namespace, config: dict) -> float:
    ratio = float(setting(args, config, "min_polyphony_ratio"))
    if not 0.0 <= ratio <= 1.0:
        raise UserError(f"min polyphony ratio {ratio} outside [0, 1]")
    return ratio


def _analysis_settings(args: argparse.Namespace, config: dict) -> dict:
    key_text = setting(args, config, "key")
    return {
        "weights": parse_weights(setting(args, config, "weights")),
        "window_policy": setting(args, config, "window_policy"),
        "chroma_weighting": setting(args, config, "chroma_weighting"),
        "vl_variant": setting(args, config, "vl_variant"),
        "key": parse_key(key_text) if key_text else None,
        "key_window_bars": setting(args, config, "key_window_bars"),
        "max_norm_mode": setting(args, config, "max_norm"),
    }


def _piece_components(piece, analysis: dict):
    return piece_tension_components(
        piece,
        analysis["weights"],
        window_policy=analysis["window_policy"],
        vl_variant=analysis["vl_variant"],
        chroma_weighting=analysis["chroma_weighting"],
        key=analysis["key"],
        key_window_bars=analysis["key_window_bars"],
        max_norm_mode=analysis["max_norm_mode"],
    )


def _piece_curve(piece, analysis: dict) -> TensionCurve:
    return _piece_components(piece, analysis)[0]


def _round9(value: float) -> float:
    return float(format(float(value), ".9g"))


def components_to_csv(components) -> str:
    """Chord-level breakdown as CSV, one row per chord window.

    The first five numeric columns are raw component values; only
    ``combined`` depends on the tension weights.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["bar_index", "chord_index", "d_prev", "d_key", "d_func",
         "dissonance", "voice_leading", "combined"]
    )
    for bar_index, bar_components in enumerate(components):
        for chord_index, c in enumerate(bar_components):
            writer.writerow(
                [bar_index, chord_index]
                + [format(v, ".9g") for v in (
                    c.d_prev, c.d_key, c.d_func,
                    c.dissonance, c.voice_leading, c.combined,
                )]
            )
    return out.getvalue()


def _analysis_payload(source: str, curve, components, key, weights) -> dict:
    return {
        "source": source,
        "key": str(key),
        "weights": {
            name: _round9(value)
            for name, value in dataclasses.asdict(weights).items()
        },
        "bar_count": curve.bar_count,
        "values": [_round9(v) for v in curve.values],
        "silent": list(curve.silent),
        "components": [
            [
                {name: _round9(value) for name, value in dataclasses.asdict(c).items()}
                for c in bar_components
            ]
            for bar_components in components
        ],
    }


def cmd_analyze(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_settings(args, config)
    ratio = _polyphony_ratio(args, config)
    piece = _read_piece(args.input)
    chords = filter_chord_tracks(piece, ratio)
    if chords.note_count == 0:
        raise UserError(
            f"{args.input}: no chord tracks at polyphony ratio {ratio}"
        )
    curve, components = _piece_components(chords, analysis)
    key = analysis["key"] or estimate_key(chords)
    payload = _analysis_payload(
        Path(args.input).name, curve, components, key, analysis["weights"]
    )

    wrote_file = False
    if args.csv:
        _write_text(args.csv, curve_to_csv(curve))
        wrote_file = True
    if args.components:
        _write_text(args.components, components_to_csv(components))
        wrote_file = True
    if args.json:
        _write_text(args.json, _dump_json(payload))
        wrote_file = True
    if args.svg:
        _write_text(
            args.svg,
            render_curves_svg(
                [(Path(args.input).name, curve.values)],
                title=f"tension ({key})",
            ),
        )
        wrote_file = True
    if wrote_file:
        print(f"{args.input}: {curve.bar_count} bar(s), estimated key {key}")
    else:
        sys.stdout.write(_dump_json(payload))
    return 0


# ----------------------------------------------------------------------------
# train
# ----------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_settings(args, config)
    ratio = _polyphony_ratio(args, config)
    order = int(setting(args, config, "order"))
    smoothing = float(setting(args, config, "smoothing"))
    if order < 1:
        raise UserError("order must be >= 1")
    if smoothing <= 0.0:
        raise UserError("smoothing must be positive")
    tok_config = TokenizerConfig()
    vocab = Vocabulary(tok_config)

    paths = _expand_midi_inputs(args.inputs)
    prepared = []  # (quantized piece, curve values)
    dropped = 0
    for path in paths:
        piece = _read_piece(path)
        quantized = quantize_piece(piece, tok_config)
        chords = filter_chord_tracks(quantized, ratio)
        if chords.note_count == 0:
            print(f"dropping {path}: no chord tracks", file=sys.stderr)
            dropped += 1
            continue
        curve = _piece_curve(chords, analysis)
        prepared.append((quantized, curve.values))
    if not prepared:
        raise UserError(
            f"chord filter (min polyphony ratio {ratio}) dropped "
            f"all {len(paths)} file(s)"
        )

    densities = [
        float(sum(1 for n in bar.notes)) for piece, _ in prepared for bar in piece.bars
    ]
    tensions = [float(v) for _, values in prepared for v in values]
    density_edges = build_bucket_edges(densities, tok_config.density_bins)
    tension_edges = build_bucket_edges(tensions, tok_config.tension_bins)
    spread = 2.0 * float(np.std(np.asarray(tensions)))
    similarity_scale = spread if spread > 1e-9 else DEFAULT_SIMILARITY_SCALE

    corpus = []
    for piece, values in prepared:
        controls = control_tokens_for_piece(piece, values, density_edges, tension_edges)
        corpus.append((encode(piece, vocab), controls))
    model = train_ngram(corpus, vocab, order, smoothing)

    bundle = ModelBundle(
        config=tok_config,
        vocab=vocab,
        model=model,
        density_edges=density_edges,
        tension_edges=tension_edges,
        similarity_scale=similarity_scale,
    )
    save_bundle(args.output, bundle)
    contexts = len(model.counts)
    print(
        f"corpus: {len(paths)} file(s), kept {len(prepared)}, dropped {dropped} "
        f"by the chord filter (min polyphony ratio {ratio})"
    )
    print(
        f"trained order-{order} model on {len(corpus)} piece(s), "
        f"{contexts} contexts -> {args.output}"
    )
    return 0


# ----------------------------------------------------------------------------
# generate
# ----------------------------------------------------------------------------


def _target_values(args: argparse.Namespace, bars: int) -> list[float]:
    try:
        curve = load_curve_file(args.curve)
    except FileNotFoundError:
        raise UserError(f"no such file: {args.curve}") from None
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UserError(f"could not read curve {args.curve}: {exc}") from exc
    if curve.bar_count < bars:
        raise UserError(
            f"target curve has {curve.bar_count} bars but {bars} were requested"
        )
    return [float(v) for v in curve.values[:bars]]


def _generation_controls(
    args: argparse.Namespace,
    bundle: ModelBundle,
    targets: list[float],
    reference,
) -> list[ControlTokens]:
    tension_bins = [bundle.tension_edges.bucket_of(v) for v in targets]
    if reference is not None:
        controls = []
        for i, value_bin in enumerate(tension_bins):
            bar = reference.bars[min(i, reference.bar_count - 1)]
            base = control_tokens_for_bar(
                bar, 0.0, bundle.density_edges, bundle.tension_edges,
                reference.percussion_tracks,
            )
            controls.append(
                ControlTokens(
                    time_signature=base.time_signature,
                    instruments=base.instruments,
                    density_bin=base.density_bin,
                    tension_bin=value_bin,
                )
            )
        return controls
    middle_density = bundle.density_edges.bins // 2
    return [
        ControlTokens((4, 4), (), middle_density, value_bin)
        for value_bin in tension_bins
    ]


def cmd_generate(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_settings(args, config)
    try:
        bundle = load_bundle(args.bundle)
    except FileNotFoundError:
        raise UserError(f"no such file: {args.bundle}") from None
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UserError(f"could not load bundle {args.bundle}: {exc}") from exc
    vocab = bundle.vocab

    bars = int(setting(args, config, "bars"))
    if bars < 1:
        raise UserError("bars must be >= 1")
    targets = _target_values(args, bars)
    try:
        params = SearchParams(
            beam_width=int(setting(args, config, "beam_width")),
            nucleus_p=float(setting(args, config, "nucleus_p")),
            temperature=float(setting(args, config, "temperature")),
            diversity_weight=float(setting(args, config, "diversity_weight")),
            tension_weight=float(setting(args, config, "tension_weight")),
            variance_threshold=float(setting(args, config, "variance_threshold")),
            max_bars=bars,
            final_candidates=int(setting(args, config, "candidates")),
            seed=int(setting(args, config, "seed")),
            diversity_mode=str(setting(args, config, "diversity_mode")),
            scale_ref=bundle.similarity_scale,
        )
    except ValueError as exc:
        raise UserError(str(exc)) from None

    reference = quantize_piece(_read_piece(args.reference), bundle.config)
    if reference.bar_count == 0:
        raise UserError(f"reference {args.reference} has no bars")
    reference_ids = encode(reference, vocab)
    ref_key = None
    ratio = _polyphony_ratio(args, config)
    ref_chords = filter_chord_tracks(reference, ratio)
    if ref_chords.note_count:
        ref_key = estimate_key(ref_chords)

    key = analysis["key"] or ref_key or Key(0, "major")
    controls = _generation_controls(args, bundle, targets, reference)
    hooks = MusicSearchHooks(
        vocab,
        key,
        controls=controls,
        reference_ids=reference_ids,
        tension_weights=analysis["weights"],
        window_policy=analysis["window_policy"],
        vl_variant=analysis["vl_variant"],
        chroma_weighting=analysis["chroma_weighting"],
    )

    bridge_command = args.bridge or os.environ.get(BRIDGE_ENV_VAR)
    model = bundle.model
    bridge = None
    if bridge_command:
        bridge = ExternalBridgeModel(bridge_command, vocab)
        model = bridge
    try:
        candidates = beam_generate(model, hooks, params, targets)
    finally:
        if bridge is not None:
            bridge.close()

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_candidates = []
    for index, candidate in enumerate(candidates, start=1):
        name = f"candidate_{index}.mid"
        warnings: list[str] = []
        piece = decode(candidate.tokens, vocab, strict=False, warnings_out=warnings)
        write_midi_file(piece, str(out_dir / name))
        report_candidates.append(
            {
                "file": name,
                "bars": candidate.bars_completed,
                "finished": candidate.finished,
                "logprob": candidate.logprob,
                "lm_norm": candidate.lm_norm,
                "final_score": candidate.final_score,
                "bar_tensions": list(candidate.bar_tensions),
                "similarity_trace": [
                    {"value": r.value, "branch": r.branch}
                    for r in candidate.similarity_trace
                ],
                "decode_warnings": warnings,
            }
        )

    report = {
        "bundle": Path(args.bundle).name,
        "target_curve": targets,
        "tension_in_ranking": params.tension_weight != 0.0,
        "params": {
            "bars": bars,
            "beam_width": params.beam_width,
            "nucleus_p": params.nucleus_p,
            "temperature": params.temperature,
            "diversity_weight": params.diversity_weight,
            "tension_weight": params.tension_weight,
            "variance_threshold": params.variance_threshold,
            "diversity_mode": params.diversity_mode,
            "seed": params.seed,
            "key": str(key),
            "scale_ref": params.scale_ref,
        },
        "candidates": report_candidates,
    }
    report_path = args.report or str(out_dir / "report.json")
    _write_text(report_path, _dump_json(report))

    overlay = [("target", list(targets))]
    overlay += [
        (f"candidate {i}", list(c.bar_tensions))
        for i, c in enumerate(candidates, start=1)
    ]
    svg_path = args.svg or str(out_dir / "curves.svg")
    _write_text(
        svg_path,
        render_curves_svg(overlay, title="target vs. achieved tension"),
    )
    print(f"wrote {len(candidates)} candidate(s) to {out_dir}")
    return 0


# ----------------------------------------------------------------------------
# evaluate
# ----------------------------------------------------------------------------


STRUCTURAL_METRICS = ("instrument_f1", "density_accuracy", "groove_similarity")


def _metrics_table(rows: list[dict], model: str, inference: str) -> str:
    """Single aggregate CSV row: model, inference, bars, then the metrics."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["model", "inference", "bars", "instrument_f1",
         "note_density_accuracy", "groove_similarity", "tension_correlation"]
    )
    bar_counts = [r["bars"] for r in rows]
    bars = bar_counts[0] if len(set(bar_counts)) == 1 else np.mean(bar_counts)
    correlations = [
        r["tension_correlation"] for r in rows
        if r.get("tension_correlation") is not None
    ]
    writer.writerow(
        [model, inference, format(float(bars), "g")]
        + [
            format(float(np.mean([r[m] for r in rows])), ".9g")
            for m in STRUCTURAL_METRICS
        ]
        + [format(float(np.mean(correlations)), ".9g") if correlations else ""]
    )
    return out.getvalue()


def cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_settings(args, config)
    ratio = _polyphony_ratio(args, config)
    variance_threshold = float(setting(args, config, "variance_threshold"))
    try:
        bundle = load_bundle(args.bundle)
    except FileNotFoundError:
        raise UserError(f"no such file: {args.bundle}") from None
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UserError(f"could not load bundle {args.bundle}: {exc}") from exc

    generated_paths = _expand_midi_inputs(args.generated)
    reference_paths = _expand_midi_inputs(args.reference)
    if len(reference_paths) not in (1, len(generated_paths)):
        raise UserError(
            f"count mismatch: {len(generated_paths)} generated piece(s) vs "
            f"{len(reference_paths)} reference(s); pass one reference or "
            f"one per piece"
        )
    references = [
        quantize_piece(_read_piece(p), bundle.config) for p in reference_paths
    ]

    override_values: list[float] | None = None
    if args.curve:
        try:
            override_values = [float(v) for v in load_curve_file(args.curve).values]
        except FileNotFoundError:
            raise UserError(f"no such file: {args.curve}") from None
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UserError(f"could not read curve {args.curve}: {exc}") from exc

    results = []
    pairs = []
    for index, path in enumerate(generated_paths):
        generated = quantize_piece(_read_piece(path), bundle.config)
        if generated.bar_count == 0:
            raise UserError(f"{path} has no bars")
        ref_index = index if len(references) > 1 else 0
        reference = references[ref_index]
        if reference.bar_count < generated.bar_count:
            raise UserError(
                f"{reference_paths[ref_index]} has {reference.bar_count} bar(s) "
                f"but {path} has {generated.bar_count}; references must be at "
                f"least as long"
            )
        reference = _bar_prefix(reference, generated.bar_count)
        entry: dict = {"file": Path(path).name,
                       "reference": Path(reference_paths[ref_index]).name,
                       "bars": generated.bar_count,
                       "tension_correlation": None}
        entry.update(
            evaluate_piece_pair(
                generated,
                reference,
                bundle.density_edges,
                bundle.config.positions_per_quarter,
            )
        )

        if override_values is not None:
            if len(override_values) < generated.bar_count:
                raise UserError(
                    f"target curve has {len(override_values)} bars but "
                    f"{path} has {generated.bar_count}"
                )
            target_values = override_values[: generated.bar_count]
        else:
            ref_chords = filter_chord_tracks(reference, ratio)
            target_values = (
                [float(v) for v in _piece_curve(ref_chords, analysis).values]
                if ref_chords.note_count
                else []
            )
        gen_chords = filter_chord_tracks(generated, ratio)
        if target_values and gen_chords.note_count:
            values = [float(v) for v in _piece_curve(gen_chords, analysis).values]
            detail = tension_correlation(
                values, target_values, variance_threshold, bundle.similarity_scale
            )
            entry["tension_correlation"] = detail.value
            entry["tension_branch"] = detail.branch
            pairs.append((values, target_values))
        results.append(entry)

    summary = tension_evaluation(pairs, variance_threshold, bundle.similarity_scale)
    report = {
        "bundle": Path(args.bundle).name,
        "references": [Path(p).name for p in reference_paths],
        "results": results,
        "aggregate": {
            m: float(np.mean([r[m] for r in results])) for m in STRUCTURAL_METRICS
        },
        "tension_summary": {
            "considered": summary.considered,
            "kept": summary.kept,
            "mean_filtered": summary.mean,
            "median_filtered": summary.median,
        },
    }
    text = _dump_json(report)
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)
    if args.table:
        _write_text(
            args.table,
            _metrics_table(results, Path(args.bundle).stem, args.label),
        )
    return 0


# ----------------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------------


def cmd_curves(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_settings(args, config)
    ratio = _polyphony_ratio(args, config)
    k = int(setting(args, config, "clusters"))
    if k < 1:
        raise UserError("clusters must be >= 1")

    names: list[str] = []
    curves: list[tuple[float, ...]] = []
    for path in _expand_midi_inputs(args.inputs):
        piece = _read_piece(path)
        chords = filter_chord_tracks(piece, ratio)
        if chords.note_count == 0:
            print(f"dropping {path}: no chord tracks", file=sys.stderr)
            continue
        names.append(Path(path).name)
        curves.append(_piece_curve(chords, analysis).values)
    if not curves:
        raise UserError(
            f"chord filter (min polyphony ratio {ratio}) dropped every input"
        )
    if k > len(curves):
        raise UserError(
            f"{k} prototype curves requested but only {len(curves)} usable "
            f"curve(s) in the corpus"
        )

    clusters = cluster_curves(curves, k)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_files = []
    for label, i in enumerate(clusters.medoid_indices, start=1):
        name = f"curve_{label}.csv"
        _write_text(str(out_dir / name), curve_to_csv(TensionCurve(curves[i])))
        curve_files.append(name)

    report = {
        "k": len(clusters.medoid_indices),
        "files": names,
        "assignments": {
            name: int(label) for name, label in zip(names, clusters.assignments)
        },
        "medoids": [names[i] for i in clusters.medoid_indices],
        "medoid_curves": [list(curves[i]) for i in clusters.medoid_indices],
        "curve_files": curve_files,
        "inertia": clusters.inertia,
    }
    _write_text(str(out_dir / "report.json"), _dump_json(report))

    length = max(1, int(round(float(np.median([len(c) for c in curves])))))
    plotted = [
        (
            f"cluster {label} ({names[i]})",
            znormalize(resample_curve(curves[i], length)).tolist(),
        )
        for label, i in enumerate(clusters.medoid_indices)
    ]
    svg_path = args.svg or str(out_dir / "curves.svg")
    _write_text(
        svg_path,
        render_curves_svg(
            plotted, title="prototype tension curves", y_label="z-tension"
        ),
    )
    print(f"wrote {len(curve_files)} prototype curve(s) to {out_dir}")
    return 0


# ----------------------------------------------------------------------------
# parser wiring
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tonaltension",
        description="Tonal tension analysis and tension-guided generation.",
    )
    parser.add_argument("--config", help="JSON file with default settings")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_analysis_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--window-policy", choices=WINDOW_POLICIES, dest="window_policy")
        p.add_argument(
            "--chroma-weighting", choices=CHROMA_WEIGHTINGS, dest="chroma_weighting"
        )
        p.add_argument("--vl-variant", choices=VL_VARIANTS, dest="vl_variant")
        p.add_argument("--weights", help="five tension weights, comma separated")
        p.add_argument("--key", help="fixed key like C:major (default: estimate)")
        p.add_argument(
            "--key-window-bars", type=int, dest="key_window_bars",
            help="re-estimate the key every N bars",
        )
        p.add_argument(
            "--max-norm", choices=("analytic", "observed"), dest="max_norm",
            help="dissonance normalization bound",
        )
        p.add_argument(
            "--min-polyphony-ratio", type=float, dest="min_polyphony_ratio",
            help="chord-track threshold in [0,1]; 0 keeps all tracks",
        )

    p = sub.add_parser("analyze", help="tension curve of one MIDI file")
    p.add_argument("input")
    p.add_argument("--csv", help="write the curve as CSV here")
    p.add_argument("--components", help="write the chord-level breakdown CSV here")
    p.add_argument("--json", help="write curve, breakdown, and key as JSON here")
    p.add_argument("--svg", help="write a curve plot here")
    add_analysis_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="fit a model bundle on MIDI files")
    p.add_argument("inputs", nargs="+", help="MIDI files or directories of them")
    p.add_argument("-o", "--output", required=True, help="bundle path to write")
    p.add_argument("--order", type=int, help="n-gram context length")
    p.add_argument("--smoothing", type=float, help="additive smoothing constant")
    add_analysis_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="tension-guided generation from a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--curve", required=True, help="target tension curve (.csv/.json)")
    p.add_argument("-o", "--output", required=True, help="directory for candidates")
    p.add_argument("--report", help="report path (default: <output>/report.json)")
    p.add_argument(
        "--reference", required=True,
        help="reference MIDI file supplying style, controls, and key",
    )
    p.add_argument("--svg", help="overlay plot path (default: <output>/curves.svg)")
    p.add_argument("--bridge", help=f"bridge command (or ${BRIDGE_ENV_VAR})")
    p.add_argument("--bars", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--nucleus-p", type=float, dest="nucleus_p")
    p.add_argument("--temperature", type=float)
    p.add_argument("--diversity-weight", type=float, dest="diversity_weight")
    p.add_argument("--tension-weight", type=float, dest="tension_weight")
    p.add_argument("--variance-threshold", type=float, dest="variance_threshold")
    p.add_argument(
        "--diversity-mode", choices=("reference", "raw"), dest="diversity_mode"
    )
    p.add_argument("--candidates", type=int, help="how many candidates to keep")
    add_analysis_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="compare generated pieces to references")
    p.add_argument("generated", nargs="+", help="MIDI files or directories of them")
    p.add_argument("--bundle", required=True)
    p.add_argument(
        "--reference", required=True, nargs="+",
        help="one reference for all pieces, or one per piece",
    )
    p.add_argument("--curve", help="target curve overriding the references' own")
    p.add_argument("-o", "--output", help="report path (default: stdout)")
    p.add_argument("--table", help="write a one-row aggregate CSV table here")
    p.add_argument("--label", default="beam", help="inference column in the table")
    p.add_argument("--variance-threshold", type=float, dest="variance_threshold")
    add_analysis_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="cluster corpus curves into prototypes")
    p.add_argument("inputs", nargs="+", help="MIDI files or directories of them")
    p.add_argument("-k", "--clusters", type=int, dest="clusters")
    p.add_argument(
        "-o", "--output", required=True,
        help="directory for curve_N.csv, report.json, and curves.svg",
    )
    p.add_argument("--svg", help="plot path override (default: <output>/curves.svg)")
    add_analysis_flags(p)
    p.set_defaults(func=cmd_curves)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
