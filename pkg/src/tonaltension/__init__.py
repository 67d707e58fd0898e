"""Tonal tension analysis and tension-guided symbolic music generation.

The library reads standard MIDI files, measures harmonic tension in tonal
interval space (chord-to-chord distance, key and function distances,
dissonance, voice-leading strain), and steers a stochastic beam search so
that generated music follows a target tension curve.  See the README for the
command-line entry points.
"""

from __future__ import annotations

from .beamsearch import (
    BeamCandidate,
    DiversityMetrics,
    GenerationCandidate,
    MusicSearchHooks,
    SearchParams,
    diversity_score,
    generate,
    metrics_from_notes,
    nucleus_sample_k,
)
from .evalmetrics import (
    TensionEvalSummary,
    density_accuracy,
    evaluate_piece_pair,
    groove_similarity,
    instrument_f1,
    tension_correlation,
    tension_evaluation,
)
from .midifile import (
    MidiParseError,
    filter_chord_tracks,
    parse_midi,
    parse_midi_file,
    write_midi,
    write_midi_file,
)
from .music import (
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
from .seqmodel import (
    BridgeError,
    ExternalBridgeModel,
    ModelBundle,
    NGramModel,
    SequenceModel,
    UniformModel,
    load_bundle,
    save_bundle,
    train_ngram,
)
from .tension import (
    CurveClusters,
    SimilarityResult,
    TensionComponents,
    TensionCurve,
    TensionWeights,
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
    piece_tension_curve,
)
from .tiv import (
    AUDIO_WEIGHTS,
    DEFAULT_WEIGHTS,
    SYMBOLIC_WEIGHTS,
    TonalIntervalVector,
    WeightProfile,
    angular_distance,
    compute_tiv,
    dissonance,
    euclidean_distance,
    max_norm,
)
from .tokens import (
    BucketEdges,
    ControlTokens,
    Token,
    TokenDecodeError,
    TokenizerConfig,
    Vocabulary,
    build_bucket_edges,
    decode,
    encode,
    quantize_piece,
)
from .voiceleading import (
    VoiceAssignment,
    minimal_vl,
    pc_interval,
    perceptual_note_distance,
    vl_tension,
)

__version__ = "0.1.0"

__all__ = [
    "AUDIO_WEIGHTS",
    "Bar",
    "BeamCandidate",
    "BridgeError",
    "BucketEdges",
    "ChordWindow",
    "ControlTokens",
    "CurveClusters",
    "DEFAULT_WEIGHTS",
    "DiversityMetrics",
    "ExternalBridgeModel",
    "GenerationCandidate",
    "Key",
    "MidiParseError",
    "ModelBundle",
    "MusicSearchHooks",
    "NGramModel",
    "Note",
    "Piece",
    "SYMBOLIC_WEIGHTS",
    "SearchParams",
    "SequenceModel",
    "SimilarityResult",
    "TensionComponents",
    "TensionCurve",
    "TensionEvalSummary",
    "TensionWeights",
    "TimeSignature",
    "Token",
    "TokenDecodeError",
    "TokenizerConfig",
    "TonalIntervalVector",
    "UniformModel",
    "VoiceAssignment",
    "Vocabulary",
    "WeightProfile",
    "angular_distance",
    "build_bucket_edges",
    "chord_tension",
    "chroma_from_pitch_classes",
    "chroma_of",
    "cluster_curves",
    "compute_tiv",
    "curve_from_csv",
    "curve_from_json",
    "curve_similarity",
    "curve_similarity_detail",
    "curve_to_csv",
    "curve_to_json",
    "decode",
    "density_accuracy",
    "dissonance",
    "diversity_score",
    "encode",
    "estimate_key",
    "euclidean_distance",
    "evaluate_piece_pair",
    "extract_chord_windows",
    "filter_chord_tracks",
    "generate",
    "groove_similarity",
    "instrument_f1",
    "load_bundle",
    "load_curve_file",
    "max_norm",
    "metrics_from_notes",
    "minimal_vl",
    "nucleus_sample_k",
    "parse_midi",
    "parse_midi_file",
    "pc_interval",
    "perceptual_note_distance",
    "piece_tension_components",
    "piece_tension_curve",
    "quantize_piece",
    "save_bundle",
    "segment_into_bars",
    "tension_correlation",
    "tension_evaluation",
    "train_ngram",
    "vl_tension",
    "write_midi",
    "write_midi_file",
]
