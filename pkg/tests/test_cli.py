import base64
import json

import numpy as np
import pytest

from tokalign import ScriptedModel, Vocabulary, fixtures, save_vocabulary
from tokalign.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def demo_paths():
    return {
        "vocab": fixtures.data_path(fixtures.DEMO_VOCAB_FILE),
        "table": fixtures.data_path(fixtures.DEMO_TABLE_FILE),
    }


@pytest.fixture()
def demo_prompt_file(tmp_path):
    path = tmp_path / "prompts.jsonl"
    record = {"id": "demo", "prompt_b64": base64.b64encode(fixtures.DEMO_PROMPT).decode()}
    path.write_text(json.dumps(record) + "\n")
    return str(path)


def read_results(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


class TestAlign:
    def test_demo_fixture_both_arms(self, capsys, tmp_path, demo_paths, demo_prompt_file):
        out_aligned = tmp_path / "aligned.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--provider", f"scripted:{demo_paths['table']}",
            "--prompt-file", demo_prompt_file,
            "--max-new-tokens", "6", "--out", str(out_aligned),
        )
        assert code == 0
        result = read_results(out_aligned)[0]
        output = base64.b64decode(result["output_b64"])
        assert output.startswith(fixtures.DEMO_PROMPT + b"turn")
        assert result["alignment_steps"] == 1

        out_plain = tmp_path / "plain.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--provider", f"scripted:{demo_paths['table']}",
            "--prompt-file", demo_prompt_file,
            "--max-new-tokens", "6", "--no-align", "--out", str(out_plain),
        )
        assert code == 0
        plain = base64.b64decode(read_results(out_plain)[0]["output_b64"])
        assert not plain.startswith(fixtures.DEMO_PROMPT + b"turn")
        assert plain.startswith(fixtures.DEMO_PROMPT + b" = []")

    def test_backtrack_one_and_three_preserve_prompt(self, capsys, tmp_path, demo_paths, demo_prompt_file):
        for b in ("1", "3"):
            out = tmp_path / f"b{b}.jsonl"
            code, _, _ = run(
                capsys, "align", "--vocab", demo_paths["vocab"],
                "--provider", f"scripted:{demo_paths['table']}",
                "--prompt-file", demo_prompt_file,
                "--backtrack", b, "--max-new-tokens", "4", "--out", str(out),
            )
            assert code == 0
            output = base64.b64decode(read_results(out)[0]["output_b64"])
            assert output.startswith(fixtures.DEMO_PROMPT)

    def test_bundled_resolution(self, capsys, tmp_path, demo_prompt_file):
        out = tmp_path / "r.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", "bundled:demo-vocab",
            "--provider", "scripted:bundled:demo-table",
            "--prompt-file", demo_prompt_file, "--max-new-tokens", "2",
            "--out", str(out),
        )
        assert code == 0

    def test_prompts_from_stdin(self, capsys, monkeypatch, tmp_path, demo_paths):
        import io

        record = json.dumps(
            {"id": "s", "prompt_b64": base64.b64encode(fixtures.DEMO_PROMPT).decode()}
        )
        monkeypatch.setattr("sys.stdin", io.StringIO(record + "\n"))
        out = tmp_path / "stdin.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--provider", f"scripted:{demo_paths['table']}",
            "--max-new-tokens", "2", "--out", str(out),
        )
        assert code == 0
        assert read_results(out)[0]["id"] == "s"

    def test_timings_flag_adds_wall_clock_fields(self, capsys, tmp_path, demo_paths, demo_prompt_file):
        out = tmp_path / "t.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--provider", f"scripted:{demo_paths['table']}",
            "--prompt-file", demo_prompt_file, "--max-new-tokens", "2",
            "--timings", "--out", str(out),
        )
        assert code == 0
        assert "timings_us" in read_results(out)[0]
        no_timings = tmp_path / "nt.jsonl"
        run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--provider", f"scripted:{demo_paths['table']}",
            "--prompt-file", demo_prompt_file, "--max-new-tokens", "2",
            "--out", str(no_timings),
        )
        assert "timings_us" not in read_results(no_timings)[0]

    def test_config_file_supplies_flags(self, capsys, tmp_path, demo_paths, demo_prompt_file):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "vocab": demo_paths["vocab"],
            "provider": f"scripted:{demo_paths['table']}",
            "max_new_tokens": 2,
        }))
        out = tmp_path / "o.jsonl"
        code, _, _ = run(
            capsys, "align", "--vocab", demo_paths["vocab"],
            "--config", str(config), "--prompt-file", demo_prompt_file,
            "--out", str(out),
        )
        assert code == 0
        assert len(read_results(out)[0]["token_ids"]) > 0


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        code = main(["align"])  # missing --vocab
        capsys.readouterr()
        assert code == 1

    def test_data_error_is_two(self, capsys, tmp_path, demo_prompt_file):
        missing = str(tmp_path / "nope.json")
        code, _, err = run(
            capsys, "align", "--vocab", missing, "--provider", "scripted:x.json",
            "--prompt-file", demo_prompt_file,
        )
        assert code == 2
        assert "error" in err

    def test_dead_end_is_three(self, capsys, tmp_path):
        vocab = Vocabulary([b"a", b"ac", b"acd", b"cd"])
        vocab_path = tmp_path / "v.json"
        save_vocabulary(vocab, str(vocab_path))
        forcing = np.zeros(4)
        forcing[vocab.id_of(b"ac")] = 1.0
        model = ScriptedModel(vocab, [], forcing)
        table_path = tmp_path / "t.json"
        table_path.write_text(json.dumps(model.to_json_dict()))
        prompts = tmp_path / "p.jsonl"
        prompts.write_text(json.dumps({"id": "x", "text": "acd"}) + "\n")
        code, _, err = run(
            capsys, "align", "--vocab", str(vocab_path),
            "--provider", f"scripted:{table_path}",
            "--prompt-file", str(prompts), "--backtrack", "1",
            "--out", str(tmp_path / "o.jsonl"),
        )
        assert code == 3
        assert "dead end" in err


class TestGenDataset:
    def test_deterministic_across_runs(self, capsys, tmp_path):
        for sub in ("r1", "r2"):
            d = tmp_path / sub
            d.mkdir()
            code, _, _ = run(
                capsys, "gen-dataset", "--corpus", "bundled:code",
                "--scenario", "subword", "--seed", "7",
                "--out", str(d / "s.jsonl"), "--out-dir", str(d),
            )
            assert code == 0
        assert (tmp_path / "r1" / "s.jsonl").read_bytes() == (
            tmp_path / "r2" / "s.jsonl"
        ).read_bytes()

    def test_scenario_all_emits_five_plus_stats(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "gen-dataset", "--corpus", "bundled:code",
            "--scenario", "all", "--seed", "3", "--out-dir", str(tmp_path),
        )
        assert code == 0
        files = {p.name for p in tmp_path.iterdir()}
        expected = {
            "subword.jsonl", "punctuation.jsonl", "prefix_sep.jsonl",
            "prefix_indent.jsonl", "contiguous_space.jsonl", "dataset_stats.json",
        }
        assert expected <= files
        stats = json.loads((tmp_path / "dataset_stats.json").read_text())
        assert set(stats) == {
            "subword", "punctuation", "prefix_sep", "prefix_indent", "contiguous_space"
        }

    def test_emitted_files_pass_validation(self, capsys, tmp_path):
        run(
            capsys, "gen-dataset", "--corpus", "bundled:code",
            "--scenario", "all", "--seed", "3", "--out-dir", str(tmp_path),
        )
        for name in ("subword", "punctuation", "prefix_sep", "prefix_indent", "contiguous_space"):
            code, out, _ = run(
                capsys, "eval", "--dataset", str(tmp_path / f"{name}.jsonl"),
                "--validate-only",
            )
            assert code == 0
            assert "0 invalid" in out


class TestEval:
    @pytest.fixture()
    def dataset(self, capsys, tmp_path):
        run(
            capsys, "gen-dataset", "--corpus", "bundled:code",
            "--scenario", "subword", "--seed", "7",
            "--out", str(tmp_path / "subword.jsonl"), "--out-dir", str(tmp_path),
        )
        vocab_path = tmp_path / "v.json"
        run(
            capsys, "vocab", "train", "--corpus", "bundled:code",
            "--target-size", "512", "--out", str(vocab_path),
        )
        return str(tmp_path / "subword.jsonl"), str(vocab_path)

    def test_both_arms_with_deltas(self, capsys, tmp_path, dataset):
        data, vocab = dataset
        report_path = tmp_path / "report.json"
        csv_path = tmp_path / "report.csv"
        code, out, _ = run(
            capsys, "eval", "--dataset", data, "--vocab", vocab,
            "--provider", "ngram:bundled:code", "--metrics", "fta,em",
            "--max-new-tokens", "12", "--out", str(report_path),
            "--csv", str(csv_path),
        )
        assert code == 0
        assert "aligned" in out and "unaligned" in out and "delta" in out
        report = json.loads(report_path.read_text())
        assert set(report["aggregates"]) == {"aligned", "unaligned"}
        assert set(report["deltas"]) == {"fta", "em"}
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 2

    def test_single_arm_matches_both(self, capsys, tmp_path, dataset):
        data, vocab = dataset
        paths = {}
        for arm in ("aligned", "both"):
            path = tmp_path / f"{arm}.json"
            code, _, _ = run(
                capsys, "eval", "--dataset", data, "--vocab", vocab,
                "--provider", "ngram:bundled:code", "--metrics", "fta",
                "--arm", arm, "--max-new-tokens", "12", "--out", str(path),
            )
            assert code == 0
            paths[arm] = json.loads(path.read_text())
        assert (
            paths["aligned"]["aggregates"]["aligned"]
            == paths["both"]["aggregates"]["aligned"]
        )

    def test_metric_restriction(self, capsys, dataset):
        data, vocab = dataset
        code, out, _ = run(
            capsys, "eval", "--dataset", data, "--vocab", vocab,
            "--provider", "ngram:bundled:code", "--metrics", "em,es",
            "--max-new-tokens", "4",
        )
        assert code == 0
        assert "em=" in out and "es=" in out and "fta=" not in out

    def test_vocab_size_mismatch_is_data_error(self, capsys, tmp_path, dataset):
        data, _ = dataset
        other = tmp_path / "tiny.json"
        save_vocabulary(Vocabulary([bytes([i]) for i in range(256)]), str(other))
        table = {"rows": [], "default": [1.0 / 10] * 10}
        table_path = tmp_path / "bad_table.json"
        table_path.write_text(json.dumps(table))
        code, _, err = run(
            capsys, "eval", "--dataset", data, "--vocab", str(other),
            "--provider", f"scripted:{table_path}",
        )
        assert code == 2

    def test_saved_records_rescore_identically(self, capsys, tmp_path, dataset):
        data, vocab = dataset
        records_path = tmp_path / "records.jsonl"
        first = tmp_path / "first.json"
        code, _, _ = run(
            capsys, "eval", "--dataset", data, "--vocab", vocab,
            "--provider", "ngram:bundled:code", "--metrics", "em,es",
            "--max-new-tokens", "8", "--save-records", str(records_path),
            "--out", str(first), "--label", "subword",
        )
        assert code == 0
        second = tmp_path / "second.json"
        code, _, _ = run(
            capsys, "eval", "--records", str(records_path), "--metrics", "em,es",
            "--out", str(second), "--label", "subword",
        )
        assert code == 0
        a = json.loads(first.read_text())
        b = json.loads(second.read_text())
        assert a["aggregates"] == b["aggregates"]

    def test_dataset_or_records_required(self, capsys):
        code, _, err = run(capsys, "eval", "--metrics", "em")
        assert code == 2
        assert "required" in err


class TestBench:
    def test_small_run_shape(self, capsys, tmp_path):
        out = tmp_path / "bench.json"
        code, _, _ = run(
            capsys, "bench", "--vocab-size", "2000", "--queries", "300",
            "--warmup", "50", "--naive-queries", "20", "--prompts", "30",
            "--train-size", "320", "--out", str(out),
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["lookup"]["trie_us"]["p50"] < report["lookup"]["naive_us"]["p50"]
        assert "histogram" in report["alignment_steps"]

    def test_skip_flags(self, capsys):
        code, out, _ = run(
            capsys, "bench", "--skip-lookup", "--prompts", "10", "--train-size", "300",
        )
        assert code == 0
        assert "lookup" not in json.loads(out)

    def test_trie_cache_written_then_reused(self, capsys, tmp_path):
        cache_path = tmp_path / "trie.bin"
        argv = [
            "bench", "--vocab-size", "1000", "--queries", "50", "--warmup", "10",
            "--naive-queries", "5", "--skip-steps", "--trie-cache", str(cache_path),
        ]
        code, _, _ = run(capsys, *argv)
        assert code == 0
        assert cache_path.exists()
        stamp = cache_path.stat().st_mtime_ns
        code, _, _ = run(capsys, *argv)
        assert code == 0
        assert cache_path.stat().st_mtime_ns == stamp  # loaded, not rebuilt


class TestVocabTools:
    def test_train_then_inspect(self, capsys, tmp_path):
        vocab_path = tmp_path / "v.json"
        code, out, _ = run(
            capsys, "vocab", "train", "--corpus", "bundled:code",
            "--target-size", "300", "--out", str(vocab_path),
        )
        assert code == 0
        assert "trained" in out
        code, out, _ = run(capsys, "vocab", "inspect", "--vocab", str(vocab_path))
        assert code == 0
        assert "covers all single bytes: True" in out

    def test_train_deterministic(self, capsys, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            code, _, _ = run(
                capsys, "vocab", "train", "--corpus", "bundled:code",
                "--target-size", "300", "--no-space-prefix", "--out", str(p),
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
