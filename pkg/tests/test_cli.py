"""Command-line interface: spec parsing, subcommands, atomicity."""

import random

import pytest

from clusterlm.cli import format_context_spec, main, parse_context_spec

from conftest import make_random_corpus


class TestContextSpecStrings:
    def test_parse_canonicalizes_farthest_first(self):
        assert parse_context_spec("w:-1,t:-2") == [("t", -2), ("w", -1)]
        assert parse_context_spec(" w:-2 , w:-1 ") == [("w", -2), ("w", -1)]

    def test_format_round_trip(self):
        for s in ("w:-1", "w:-2,w:-1", "g:-3,t:-2,w:-1"):
            slots = parse_context_spec(s)
            assert parse_context_spec(format_context_spec(slots)) == slots

    def test_parse_rejects_malformed_slots(self):
        for bad in ("w", "x:-1", "w:one", "w:0", "w:1", ""):
            with pytest.raises(ValueError):
                parse_context_spec(bad)

    def test_parse_rejects_duplicate_offsets(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_context_spec("w:-1,t:-1")


@pytest.fixture()
def workdir(tmp_path):
    """Corpus files plus a helper asserting no temp leftovers."""
    train = tmp_path / "train.txt"
    held = tmp_path / "held.txt"
    rng = random.Random(5150)
    train.write_text("\n".join(make_random_corpus(5150, n_sentences=120, n_words=10)) + "\n")
    held.write_text("\n".join(make_random_corpus(5151, n_sentences=25, n_words=10)) + "\n")
    return tmp_path


def run_ok(args, capsys):
    rc = main([str(a) for a in args])
    out, err = capsys.readouterr()
    assert rc == 0, err or out
    return out


def run_fail(args, capsys, expect_rc=1):
    rc = main([str(a) for a in args])
    out, err = capsys.readouterr()
    assert rc == expect_rc
    return err


def no_tmp_leftovers(root):
    assert not list(root.rglob("*.tmp"))


class TestPipeline:
    def test_full_workflow(self, workdir, capsys):
        d = workdir
        out = run_ok(["vocab", "build", "--corpus", d / "train.txt",
                      "--out", d / "vocab.txt"], capsys)
        assert "vocabulary" in out

        out = run_ok(["counts", "collect", "--corpus", d / "train.txt",
                      "--vocab", d / "vocab.txt", "--context", "w:-2,w:-1",
                      "--out", d / "counts.tsv"], capsys)
        assert "distinct contexts" in out

        out = run_ok(["cluster", "run", "--counts", d / "counts.tsv",
                      "--states", "6", "--categories", "5", "--min-count", "2",
                      "--tree", "--out", d / "clusters.tsv",
                      "--model-out", d / "class.model",
                      "--vocab", d / "vocab.txt"], capsys)
        assert "criterion" in out and "class model" in out

        out = run_ok(["classes", "export", "--clustering", d / "clusters.tsv",
                      "--counts", d / "counts.tsv", "--vocab", d / "vocab.txt",
                      "--out", d / "classes.tsv", "--show", "3"], capsys)
        assert "class 0:" in out
        lines = (d / "classes.tsv").read_text().splitlines()
        vocab_size = len((d / "vocab.txt").read_text().splitlines()) - 3  # specials header
        assert len(lines) == vocab_size
        assert all("\t" in line for line in lines)

        run_ok(["ngram", "train", "--corpus", d / "train.txt",
                "--vocab", d / "vocab.txt", "--order", "3",
                "--out", d / "backoff.model"], capsys)

        out = run_ok(["interp", "tune", "--models", d / "class.model",
                      d / "backoff.model", "--heldout", d / "held.txt",
                      "--vocab", d / "vocab.txt", "--out", d / "mix.model"], capsys)
        assert "weights:" in out and "heldout perplexity" in out

        out = run_ok(["eval", "ppl", "--model", d / "mix.model",
                      "--test", d / "held.txt", "--vocab", d / "vocab.txt",
                      "--per-sentence", "--report", d / "eval.tsv"], capsys)
        assert "perplexity" in out
        assert "sentence 0:" in out
        report = dict(
            line.split("\t")[:2] for line in (d / "eval.tsv").read_text().splitlines()
        )
        assert float(report["perplexity"]) > 1.0
        assert int(report["events"]) == sum(
            len(l.split()) + 1 for l in (d / "held.txt").read_text().splitlines() if l.strip()
        )
        no_tmp_leftovers(d)

    def test_deterministic_corpus_reaches_perplexity_one(self, tmp_path, capsys):
        d = tmp_path
        (d / "train.txt").write_text("a b\na b\n")
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                "--context", "w:-1", "--out", d / "c.tsv"], capsys)
        # default min-count leaves the frequency-ranked singleton start
        # untouched; a zero discount then gives exact relative frequencies
        run_ok(["cluster", "run", "--counts", d / "c.tsv", "--states", "3",
                "--categories", "5", "--discount", "0",
                "--out", d / "cl.tsv", "--model-out", d / "m.model",
                "--vocab", d / "v.txt"], capsys)
        run_ok(["eval", "ppl", "--model", d / "m.model", "--test", d / "train.txt",
                "--vocab", d / "v.txt", "--report", d / "r.tsv"], capsys)
        report = dict(line.split("\t") for line in (d / "r.tsv").read_text().splitlines())
        assert float(report["perplexity"]) == 1.0
        assert float(report["logprob"]) == 0.0

    def test_skip_unknown_flag(self, tmp_path, capsys):
        d = tmp_path
        (d / "train.txt").write_text("a b\na b\n")
        (d / "test.txt").write_text("a zzz b\n")
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                "--context", "w:-1", "--out", d / "c.tsv"], capsys)
        run_ok(["cluster", "run", "--counts", d / "c.tsv", "--states", "3",
                "--categories", "5", "--discount", "0",
                "--out", d / "cl.tsv", "--model-out", d / "m.model",
                "--vocab", d / "v.txt"], capsys)
        # the unmapped token gets zero probability under a zero discount
        err = run_fail(["eval", "ppl", "--model", d / "m.model",
                        "--test", d / "test.txt", "--vocab", d / "v.txt"], capsys)
        assert err.startswith("error:") and "zero probability" in err
        out = run_ok(["eval", "ppl", "--model", d / "m.model", "--test", d / "test.txt",
                      "--vocab", d / "v.txt", "--skip-unknown"], capsys)
        assert "perplexity" in out


class TestTagAndClassSlots:
    def test_tag_slots_need_tagmap(self, workdir, capsys):
        d = workdir
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        err = run_fail(["counts", "collect", "--corpus", d / "train.txt",
                        "--vocab", d / "v.txt", "--context", "t:-1",
                        "--out", d / "c.tsv"], capsys)
        assert err.startswith("error:") and "--tagmap" in err
        assert not (d / "c.tsv").exists()
        no_tmp_leftovers(d)

    def test_class_map_round_trips_through_counts(self, workdir, capsys):
        d = workdir
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                "--context", "w:-1", "--out", d / "c1.tsv"], capsys)
        run_ok(["cluster", "run", "--counts", d / "c1.tsv", "--states", "4",
                "--categories", "4", "--min-count", "2", "--out", d / "cl1.tsv"], capsys)
        run_ok(["classes", "export", "--clustering", d / "cl1.tsv", "--counts", d / "c1.tsv",
                "--vocab", d / "v.txt", "--out", d / "classes.tsv"], capsys)
        # exported categories feed a second, class-conditioned count pass
        run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                "--context", "g:-2,w:-1", "--classmap", d / "classes.tsv",
                "--out", d / "c2.tsv"], capsys)
        head = (d / "c2.tsv").read_text().splitlines()[:6]
        assert any(line.startswith("#slot\t-2\tg") for line in head)

    def test_cluster_model_out_requires_vocab(self, workdir, capsys):
        d = workdir
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                "--context", "w:-1", "--out", d / "c.tsv"], capsys)
        err = run_fail(["cluster", "run", "--counts", d / "c.tsv", "--states", "4",
                        "--categories", "4", "--out", d / "cl.tsv",
                        "--model-out", d / "m.model"], capsys)
        assert "requires --vocab" in err
        assert not (d / "m.model").exists()


class TestFailureModes:
    def test_missing_input_file(self, tmp_path, capsys):
        err = run_fail(["vocab", "build", "--corpus", tmp_path / "nope.txt",
                        "--out", tmp_path / "v.txt"], capsys)
        assert err.startswith("error:")
        assert not (tmp_path / "v.txt").exists()

    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        rc = main(["vocab", "build", "--corpus", "x", "--out", "y", "--bogus"])
        capsys.readouterr()
        assert rc == 2

    def test_missing_required_flag_is_usage_error(self, capsys):
        rc = main(["vocab", "build"])
        capsys.readouterr()
        assert rc == 2

    def test_threads_must_be_positive(self, tmp_path, capsys):
        (tmp_path / "t.txt").write_text("a b\n")
        err = run_fail(["vocab", "build", "--corpus", tmp_path / "t.txt",
                        "--out", tmp_path / "v.txt", "--threads", "0"], capsys)
        assert "--threads" in err

    def test_non_model_file_rejected_by_interp(self, tmp_path, capsys):
        d = tmp_path
        (d / "train.txt").write_text("a b\n")
        (d / "junk.model").write_text("not a model\n")
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        err = run_fail(["interp", "tune", "--models", d / "junk.model", d / "junk.model",
                        "--heldout", d / "train.txt", "--vocab", d / "v.txt",
                        "--out", d / "mix.model"], capsys)
        assert "unrecognized model file" in err
        assert not (d / "mix.model").exists()


class TestManifest:
    def test_manifest_records_inputs_and_argv(self, tmp_path, capsys):
        d = tmp_path
        (d / "train.txt").write_text("a b\nb a\n")
        argv = ["vocab", "build", "--corpus", str(d / "train.txt"),
                "--out", str(d / "v.txt"), "--manifest", str(d / "m1.tsv")]
        run_ok(argv, capsys)
        lines = (d / "m1.tsv").read_text().splitlines()
        assert lines[0] == "#clusterlm-manifest v1"
        assert lines[1].startswith("#argv\t")
        digest, path = lines[2].split("\t")
        assert len(digest) == 64 and path.endswith("train.txt")

    def test_manifest_is_deterministic(self, tmp_path, capsys):
        d = tmp_path
        (d / "train.txt").write_text("a b\nb a\n")
        base = ["vocab", "build", "--corpus", str(d / "train.txt"), "--out", str(d / "v.txt")]
        run_ok(base + ["--manifest", str(d / "m1.tsv")], capsys)
        run_ok(base + ["--manifest", str(d / "m2.tsv")], capsys)
        m1 = (d / "m1.tsv").read_text().replace("m1.tsv", "MAN")
        m2 = (d / "m2.tsv").read_text().replace("m2.tsv", "MAN")
        assert m1 == m2


class TestReproducibility:
    def test_repeated_runs_write_identical_bytes(self, workdir, capsys):
        d = workdir
        run_ok(["vocab", "build", "--corpus", d / "train.txt", "--out", d / "v.txt"], capsys)
        for out in ("c1.tsv", "c2.tsv"):
            run_ok(["counts", "collect", "--corpus", d / "train.txt", "--vocab", d / "v.txt",
                    "--context", "w:-2,w:-1", "--out", d / out], capsys)
        assert (d / "c1.tsv").read_bytes() == (d / "c2.tsv").read_bytes()
        for out in ("cl1.tsv", "cl2.tsv"):
            run_ok(["cluster", "run", "--counts", d / "c1.tsv", "--states", "5",
                    "--categories", "5", "--min-count", "2", "--tree",
                    "--out", d / out], capsys)
        assert (d / "cl1.tsv").read_bytes() == (d / "cl2.tsv").read_bytes()
