"""Command-line workflows: analyze, train, generate, evaluate, curves."""
from __future__ import annotations

import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

import rawmidi
from conftest import FIXTURES
from tonaltension.cli import main
from tonaltension.seqmodel import load_bundle
from tonaltension.tension import load_curve_file

TRIADS = str(FIXTURES / "triads.mid")
MONO = str(FIXTURES / "mono.mid")
CORPUS = str(FIXTURES / "corpus")


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="session")
def bundle_path(tmp_path_factory) -> str:
    out = tmp_path_factory.mktemp("model") / "bundle.json"
    code = main(["train", CORPUS, "-o", str(out), "--order", "3"])
    assert code == 0
    return str(out)


@pytest.fixture()
def target_curve(tmp_path) -> str:
    path = tmp_path / "target.csv"
    path.write_text("bar_index,tension\n0,10\n1,30\n2,20\n")
    return str(path)


class TestAnalyze:
    def test_stdout_json_payload(self, capsys):
        code, out, _ = run(capsys, "analyze", TRIADS)
        assert code == 0
        payload = json.loads(out)
        assert payload["source"] == "triads.mid"
        assert payload["key"] == "C major"
        assert payload["bar_count"] == 8
        assert len(payload["values"]) == 8
        assert len(payload["components"]) == 8
        assert payload["silent"] == [False] * 8

    def test_repeated_chord_yields_constant_curve(self, capsys, tmp_path):
        notes = [(bar * 1920, 1920, 60 + p, 62) for bar in range(4) for p in (0, 4, 7)]
        path = tmp_path / "static.mid"
        path.write_bytes(rawmidi.simple_file(notes))
        csv_path = tmp_path / "static.csv"
        code, _, _ = run(capsys, "analyze", str(path), "--csv", str(csv_path))
        assert code == 0
        curve = load_curve_file(str(csv_path))
        assert len(set(curve.values)) == 1

    def test_csv_matches_json_values(self, capsys, tmp_path):
        csv_path = tmp_path / "curve.csv"
        json_path = tmp_path / "curve.json"
        code, _, _ = run(capsys, "analyze", TRIADS, "--csv", str(csv_path),
                         "--json", str(json_path))
        assert code == 0
        from_csv = load_curve_file(str(csv_path))
        payload = json.loads(Path(json_path).read_text())
        assert list(from_csv.values) == pytest.approx(payload["values"], abs=1e-8)

    def test_components_csv_layout(self, capsys, tmp_path):
        path = tmp_path / "parts.csv"
        code, _, _ = run(capsys, "analyze", TRIADS, "--components", str(path))
        assert code == 0
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bar_index", "chord_index", "d_prev", "d_key", "d_func",
                           "dissonance", "voice_leading", "combined"]
        assert len(rows) > 1

    def test_weights_change_only_the_combined_column(self, capsys, tmp_path):
        base = tmp_path / "base.csv"
        heavy = tmp_path / "heavy.csv"
        assert run(capsys, "analyze", TRIADS, "--components", str(base))[0] == 0
        assert run(capsys, "analyze", TRIADS, "--components", str(heavy),
                   "--weights", "1,1,1,60,5")[0] == 0
        with open(base, newline="") as fh:
            base_rows = list(csv.reader(fh))[1:]
        with open(heavy, newline="") as fh:
            heavy_rows = list(csv.reader(fh))[1:]
        for left, right in zip(base_rows, heavy_rows):
            assert left[:-1] == right[:-1]
            assert left[-1] != right[-1]

    def test_svg_written(self, capsys, tmp_path):
        path = tmp_path / "curve.svg"
        assert run(capsys, "analyze", TRIADS, "--svg", str(path))[0] == 0
        ET.parse(path)

    def test_chordless_input_fails_with_message(self, capsys):
        code, _, err = run(capsys, "analyze", MONO)
        assert code == 2
        assert "no chord tracks" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "analyze", "/nonexistent.mid")
        assert code == 2

    def test_malformed_midi(self, capsys, tmp_path):
        bad = tmp_path / "bad.mid"
        bad.write_bytes(b"MThd garbage")
        code, _, err = run(capsys, "analyze", str(bad))
        assert code == 2
        assert "could not read" in err

    def test_fixed_key_flag(self, capsys):
        code, out, _ = run(capsys, "analyze", TRIADS, "--key", "G:major")
        assert code == 0
        assert json.loads(out)["key"] == "G major"

    def test_bad_key_flag(self, capsys):
        code, _, _ = run(capsys, "analyze", TRIADS, "--key", "H:minor")
        assert code == 2

    def test_bad_weights_flag(self, capsys):
        code, _, _ = run(capsys, "analyze", TRIADS, "--weights", "1,2")
        assert code == 2


class TestConfigFile:
    def test_unknown_key_rejected(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"beem_width": 4}))
        code, _, err = run(capsys, "--config", str(config), "analyze", TRIADS)
        assert code == 2
        assert "beem_width" in err

    def test_settings_apply(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"key": "D:major"}))
        code, out, _ = run(capsys, "--config", str(config), "analyze", TRIADS)
        assert code == 0
        assert json.loads(out)["key"] == "D major"

    def test_flag_overrides_config(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"key": "D:major"}))
        code, out, _ = run(capsys, "--config", str(config), "analyze", TRIADS,
                           "--key", "A:minor")
        assert code == 0
        assert json.loads(out)["key"] == "A minor"

    def test_unreadable_config(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("{not json")
        assert run(capsys, "--config", str(config), "analyze", TRIADS)[0] == 2


class TestTrain:
    def test_bundle_written_and_loadable(self, bundle_path, capsys):
        bundle = load_bundle(bundle_path)
        assert bundle.model.order == 3
        assert bundle.model.counts
        assert bundle.similarity_scale > 0

    def test_corpus_summary_printed(self, capsys, tmp_path):
        out = tmp_path / "bundle.json"
        code, stdout, _ = run(capsys, "train", CORPUS, "-o", str(out))
        assert code == 0
        assert "6 file(s)" in stdout

    def test_deterministic_output(self, capsys, tmp_path):
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        assert run(capsys, "train", CORPUS, "-o", str(first))[0] == 0
        assert run(capsys, "train", CORPUS, "-o", str(second))[0] == 0
        assert first.read_bytes() == second.read_bytes()

    def test_chordless_corpus_rejected(self, capsys):
        code, _, err = run(capsys, "train", MONO, "-o", "/tmp/never.json")
        assert code == 2
        assert "chord filter" in err

    def test_empty_directory_rejected(self, capsys, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code, _, _ = run(capsys, "train", str(empty), "-o", str(tmp_path / "x.json"))
        assert code == 2

    def test_bad_order_rejected(self, capsys, tmp_path):
        code, _, _ = run(capsys, "train", CORPUS, "-o", str(tmp_path / "x.json"),
                         "--order", "0")
        assert code == 2


def generate_args(bundle_path, target_curve, out_dir, *extra):
    return ["generate", "--bundle", bundle_path, "--curve", target_curve,
            "--reference", TRIADS, "-o", str(out_dir), "--bars", "3",
            "--beam-width", "2", "--candidates", "2", "--seed", "11", *extra]


class TestGenerate:
    def test_writes_candidates_report_and_plot(self, capsys, tmp_path,
                                               bundle_path, target_curve):
        out_dir = tmp_path / "gen"
        code, _, _ = run(capsys, *generate_args(bundle_path, target_curve, out_dir))
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert len(report["candidates"]) == 2
        for entry in report["candidates"]:
            path = out_dir / entry["file"]
            assert path.exists()
            assert entry["bars"] <= 3
            assert len(entry["bar_tensions"]) == entry["bars"]
        ET.parse(out_dir / "curves.svg")
        assert report["target_curve"] == [10.0, 30.0, 20.0]

    def test_fixed_seed_reproducible(self, capsys, tmp_path, bundle_path, target_curve):
        first = tmp_path / "one"
        second = tmp_path / "two"
        assert run(capsys, *generate_args(bundle_path, target_curve, first))[0] == 0
        assert run(capsys, *generate_args(bundle_path, target_curve, second))[0] == 0
        assert (first / "candidate_1.mid").read_bytes() == \
            (second / "candidate_1.mid").read_bytes()
        assert (first / "report.json").read_text() == (second / "report.json").read_text()

    def test_candidates_load_as_midi(self, capsys, tmp_path, bundle_path, target_curve):
        from tonaltension.midifile import parse_midi_file

        out_dir = tmp_path / "gen"
        assert run(capsys, *generate_args(bundle_path, target_curve, out_dir))[0] == 0
        piece = parse_midi_file(str(out_dir / "candidate_1.mid"))
        assert piece.bar_count >= 1

    def test_short_curve_rejected(self, capsys, tmp_path, bundle_path, target_curve):
        args = generate_args(bundle_path, target_curve, tmp_path / "gen")
        args[args.index("--bars") + 1] = "9"
        code, _, err = run(capsys, *args)
        assert code == 2
        assert "target curve" in err

    def test_zero_bars_rejected(self, capsys, tmp_path, bundle_path, target_curve):
        args = generate_args(bundle_path, target_curve, tmp_path / "gen")
        args[args.index("--bars") + 1] = "0"
        assert run(capsys, *args)[0] == 2

    def test_more_candidates_than_beam_rejected(self, capsys, tmp_path,
                                                bundle_path, target_curve):
        args = generate_args(bundle_path, target_curve, tmp_path / "gen",
                             "--candidates", "5")
        assert run(capsys, *args)[0] == 2

    def test_missing_bundle(self, capsys, tmp_path, target_curve):
        args = generate_args(str(tmp_path / "ghost.json"), target_curve,
                             tmp_path / "gen")
        assert run(capsys, *args)[0] == 2

    def test_reference_is_required(self, capsys, tmp_path, bundle_path, target_curve):
        argv = ["generate", "--bundle", bundle_path, "--curve", target_curve,
                "-o", str(tmp_path / "gen")]
        with pytest.raises(SystemExit):
            main(argv)
        capsys.readouterr()


class TestEvaluate:
    def test_self_evaluation_report(self, capsys, bundle_path, tmp_path):
        out = tmp_path / "report.json"
        code, _, _ = run(capsys, "evaluate", TRIADS, "--bundle", bundle_path,
                         "--reference", TRIADS, "-o", str(out))
        assert code == 0
        report = json.loads(out.read_text())
        (entry,) = report["results"]
        assert entry["instrument_f1"] == pytest.approx(1.0)
        assert entry["density_accuracy"] == pytest.approx(1.0)
        assert entry["groove_similarity"] == pytest.approx(1.0)
        assert entry["tension_correlation"] == pytest.approx(1.0)
        assert report["aggregate"]["instrument_f1"] == pytest.approx(1.0)

    def test_stdout_when_no_output_given(self, capsys, bundle_path):
        code, out, _ = run(capsys, "evaluate", TRIADS, "--bundle", bundle_path,
                           "--reference", TRIADS)
        assert code == 0
        assert json.loads(out)["results"]

    def test_single_reference_broadcasts(self, capsys, bundle_path):
        corpus_files = sorted(str(p) for p in Path(CORPUS).glob("*.mid"))[:2]
        code, out, _ = run(capsys, "evaluate", *corpus_files, "--bundle", bundle_path,
                           "--reference", TRIADS)
        assert code == 0
        assert len(json.loads(out)["results"]) == 2

    def test_count_mismatch_rejected(self, capsys, bundle_path):
        corpus_files = sorted(str(p) for p in Path(CORPUS).glob("*.mid"))
        code, _, err = run(capsys, "evaluate", *corpus_files[:2], "--bundle",
                           bundle_path, "--reference", *corpus_files[:3])
        assert code == 2
        assert "mismatch" in err

    def test_short_reference_rejected(self, capsys, bundle_path, fixtures_dir):
        short = str(fixtures_dir / "two_instruments.mid")  # 4 bars vs 8
        code, _, err = run(capsys, "evaluate", TRIADS, "--bundle", bundle_path,
                           "--reference", short)
        assert code == 2
        assert "at least as long" in err

    def test_table_written(self, capsys, bundle_path, tmp_path):
        table = tmp_path / "table.csv"
        code, _, _ = run(capsys, "evaluate", TRIADS, "--bundle", bundle_path,
                         "--reference", TRIADS, "--table", str(table),
                         "--label", "self-check")
        assert code == 0
        with open(table, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["model", "inference", "bars", "instrument_f1",
                           "note_density_accuracy", "groove_similarity",
                           "tension_correlation"]
        assert len(rows) == 2
        assert rows[1][1] == "self-check"

    def test_curve_override(self, capsys, bundle_path, tmp_path):
        curve = tmp_path / "flat.csv"
        lines = ["bar_index,tension"] + [f"{i},12.5" for i in range(8)]
        curve.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "evaluate", TRIADS, "--bundle", bundle_path,
                           "--reference", TRIADS, "--curve", str(curve))
        assert code == 0
        (entry,) = json.loads(out)["results"]
        assert entry["tension_branch"] == "fallback"


class TestCurves:
    def test_prototype_extraction(self, capsys, tmp_path):
        out_dir = tmp_path / "protos"
        code, stdout, _ = run(capsys, "curves", CORPUS, "-k", "2", "-o", str(out_dir))
        assert code == 0
        for name in ("curve_1.csv", "curve_2.csv", "report.json", "curves.svg"):
            assert (out_dir / name).exists()
        report = json.loads((out_dir / "report.json").read_text())
        assert len(report["curve_files"]) == 2
        curve = load_curve_file(str(out_dir / "curve_1.csv"))
        assert curve.bar_count > 0
        ET.parse(out_dir / "curves.svg")

    def test_prototypes_usable_as_generation_targets(self, capsys, tmp_path,
                                                     bundle_path):
        out_dir = tmp_path / "protos"
        assert run(capsys, "curves", CORPUS, "-k", "1", "-o", str(out_dir))[0] == 0
        gen_dir = tmp_path / "gen"
        code, _, _ = run(capsys, "generate", "--bundle", bundle_path,
                         "--curve", str(out_dir / "curve_1.csv"),
                         "--reference", TRIADS, "-o", str(gen_dir),
                         "--bars", "2", "--beam-width", "2", "--candidates", "1")
        assert code == 0

    def test_too_many_clusters_rejected(self, capsys, tmp_path):
        code, _, err = run(capsys, "curves", CORPUS, "-k", "40",
                           "-o", str(tmp_path / "protos"))
        assert code == 2
        assert "usable curve" in err

    def test_zero_clusters_rejected(self, capsys, tmp_path):
        code, _, _ = run(capsys, "curves", CORPUS, "-k", "0",
                         "-o", str(tmp_path / "protos"))
        assert code == 2

    def test_chordless_inputs_rejected(self, capsys, tmp_path):
        code, _, err = run(capsys, "curves", MONO, "-k", "1",
                           "-o", str(tmp_path / "protos"))
        assert code == 2
        assert "chord filter" in err


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "tonaltension.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    for sub in ("analyze", "train", "generate", "evaluate", "curves"):
        assert sub in proc.stdout
