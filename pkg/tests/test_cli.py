import numpy as np
import pytest

from binsight.cli import main
from binsight.dataset import load_csv
from binsight.evaluation import parse_report

SMALL_SPEC = """\
[family]
name = One
motif = random 64
samples = 12
mutation = 0.02
length = 900..1500

[family]
name = Two
motif = random 64
samples = 12
mutation = 0.02
length = 900..1500
"""


@pytest.fixture
def corpus(tmp_path):
    root = tmp_path / "bins"
    for fam, payload in (("A", b"\x01" * 50), ("A", b"\x02" * 70), ("B", b"\xf0" * 90)):
        d = root / fam
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{len(payload)}.bin").write_bytes(payload)
    return root


def test_featurize_three_files_and_rerun_identical(corpus, tmp_path, capsys):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["featurize", str(corpus), "-o", str(out1)]) == 0
    assert main(["featurize", str(corpus), "-o", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    ds = load_csv(out1.read_bytes())
    assert len(ds) == 3 and ds.feature_len == 1024
    assert ds.labels_text() == ["A", "A", "B"]
    assert "3 files" in capsys.readouterr().out


def test_featurize_manifest_side_and_pgm(corpus, tmp_path):
    manifest = tmp_path / "labels.tsv"
    manifest.write_text("A/50.bin\tfirst\nB/90.bin\tsecond\n")
    out = tmp_path / "m.csv"
    pgm = tmp_path / "pgm"
    assert main(["featurize", str(corpus), "-o", str(out), "--labels", str(manifest),
                 "--side", "8", "--pgm-dir", str(pgm)]) == 0
    ds = load_csv(out.read_bytes())
    assert ds.labels_text() == ["first", "second"] and ds.feature_len == 64
    assert (pgm / "A/50.bin.pgm").read_bytes().startswith(b"P5\n32 2\n255\n")


def test_featurize_empty_file(corpus, tmp_path, capsys):
    (corpus / "B" / "empty.bin").write_bytes(b"")
    out = tmp_path / "x.csv"
    assert main(["featurize", str(corpus), "-o", str(out), "--strict"]) == 1
    assert "B/empty.bin" in capsys.readouterr().err
    assert main(["featurize", str(corpus), "-o", str(out)]) == 0
    assert len(load_csv(out.read_bytes())) == 3
    assert "skipped" in capsys.readouterr().err


def test_featurize_missing_dir_and_bad_flags(tmp_path):
    assert main(["featurize", str(tmp_path / "nope"), "-o", str(tmp_path / "o.csv")]) == 2
    rule = tmp_path / "rule.txt"
    rule.write_text("100 8\n")
    (tmp_path / "d").mkdir()
    assert main(["featurize", str(tmp_path / "d"), "-o", str(tmp_path / "o.csv"),
                 "--width-rule", str(rule)]) == 2
    assert main(["featurize", str(tmp_path / "d"), "-o", str(tmp_path / "o.csv"),
                 "--side", "1"]) == 2


def test_synth_bundled_spec_writes_1000_files(tmp_path, capsys):
    out = tmp_path / "corpus"
    assert main(["synth", "--seed", "3", "-o", str(out)]) == 0
    lines = (out / "manifest.tsv").read_text().splitlines()
    assert len(lines) == 1000
    assert len([p for p in out.rglob("*.bin")]) == 1000
    assert "seed=3" in capsys.readouterr().out


def test_synth_is_reproducible(tmp_path):
    spec = tmp_path / "s.spec"
    spec.write_text(SMALL_SPEC)
    for name in ("x", "y"):
        assert main(["synth", str(spec), "--seed", "5", "-o", str(tmp_path / name)]) == 0
    files = sorted(p.relative_to(tmp_path / "x") for p in (tmp_path / "x").rglob("*"))
    for rel in files:
        a, b = tmp_path / "x" / rel, tmp_path / "y" / rel
        assert a.is_dir() or a.read_bytes() == b.read_bytes()


def test_synth_malformed_spec_exit_2_with_line(tmp_path, capsys):
    spec = tmp_path / "bad.spec"
    spec.write_text("[family]\nname = A\nsamples = many\nmotif = random 8\n"
                    "mutation = 0\nlength = 8\n")
    assert main(["synth", str(spec), "-o", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err


def _small_csv(tmp_path):
    spec = tmp_path / "s.spec"
    spec.write_text(SMALL_SPEC)
    assert main(["synth", str(spec), "-o", str(tmp_path / "bins")]) == 0
    csv = tmp_path / "all.csv"
    assert main(["featurize", str(tmp_path / "bins"), "-o", str(csv), "--side", "8"]) == 0
    return csv


def test_split_contract(tmp_path):
    csv = _small_csv(tmp_path)
    tr, te = tmp_path / "tr.csv", tmp_path / "te.csv"
    assert main(["split", str(csv), "--seed", "1", "--train", str(tr), "--test", str(te)]) == 0
    full, train, test = (load_csv(p.read_bytes()) for p in (csv, tr, te))
    assert train.class_counts().tolist() == [10, 10]
    rows = sorted(map(bytes, np.concatenate([train.X, test.X])))
    assert rows == sorted(map(bytes, full.X))
    for bad in ("0", "1", "1.5"):
        assert main(["split", str(csv), "--fraction", bad, "--train", str(tr),
                     "--test", str(te)]) == 2


def test_pipeline_train_eval_cv_predict(tmp_path, capsys):
    csv = _small_csv(tmp_path)
    tr, te = tmp_path / "tr.csv", tmp_path / "te.csv"
    model = tmp_path / "model.bsrf"
    assert main(["split", str(csv), "--train", str(tr), "--test", str(te)]) == 0
    assert main(["cv", str(tr), "-o", str(tmp_path / "cv.txt"), "--folds", "4",
                 "--trees", "10", "--seed", "2"]) == 0
    cv = parse_report((tmp_path / "cv.txt").read_text())
    assert int(cv["N"]) == 20 and "Mean Fold Accuracy" in cv
    assert main(["train", str(tr), "-o", str(model), "--trees", "15", "--seed", "4"]) == 0
    assert main(["eval", str(model), str(te), "-o", str(tmp_path / "eval.txt")]) == 0
    rep = parse_report((tmp_path / "eval.txt").read_text())
    assert {"Accuracy", "Kappa", "Accuracy Lower", "Accuracy Upper"} <= set(rep)
    assert float(rep["Accuracy Lower"]) <= float(rep["Accuracy"]) <= float(rep["Accuracy Upper"])
    assert (tmp_path / "eval.confusion.csv").read_text().startswith("actual\\predicted,One,Two")
    assert (tmp_path / "eval.heatmap.pgm").read_bytes().startswith(b"P5\n2 2\n")
    out = capsys.readouterr().out
    assert "seed=4" in out and "kappa=" in out

    assert main(["predict", str(model), str(te)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    binary = next((tmp_path / "bins" / "Two").iterdir())
    assert main(["predict", str(model), str(binary)]) == 0
    family, frac = capsys.readouterr().out.strip().split("\t")
    assert family == "Two" and 0.5 <= float(frac) <= 1.0


def test_feature_length_mismatch_exit_1(tmp_path, capsys):
    csv = _small_csv(tmp_path)
    model = tmp_path / "m.bsrf"
    assert main(["train", str(csv), "-o", str(model), "--trees", "3"]) == 0
    other = tmp_path / "wide.csv"
    assert main(["featurize", str(tmp_path / "bins"), "-o", str(other), "--side", "4"]) == 0
    capsys.readouterr()
    assert main(["eval", str(model), str(other), "-o", str(tmp_path / "r.txt")]) == 1
    err = capsys.readouterr().err
    assert "64" in err and "16" in err


def test_bad_model_and_usage_errors(tmp_path):
    junk = tmp_path / "junk.bsrf"
    junk.write_bytes(b"not a model")
    csv = _small_csv(tmp_path)
    assert main(["predict", str(junk), str(csv)]) == 1
    assert main(["cv", str(csv), "-o", str(tmp_path / "r"), "--folds", "1"]) == 2
    assert main(["train", str(csv), "-o", str(tmp_path / "m"), "--trees", "0"]) == 2
    assert main(["train", str(csv), "-o", str(tmp_path / "m"), "--mtry", "999"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2
