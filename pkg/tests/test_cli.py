import numpy as np
import pytest

from vqpool import cli, formats, transforms, vq


GEN = ["gen", "--classes", "3", "--train-per-class", "5", "--test-per-class", "2",
       "--F", "4", "--V", "32", "--t-min", "5", "--t-max", "12", "--seed", "3"]


@pytest.fixture
def data(tmp_path):
    prefix = str(tmp_path / "toy")
    assert cli.main(GEN + ["--out", prefix]) == 0
    return tmp_path, f"{prefix}.train.spd1", f"{prefix}.test.spd1"


def test_gen_writes_readable_datasets(data):
    tmp_path, train, test = data
    train_header, train_records = formats.load_dataset(train)
    test_header, test_records = formats.load_dataset(test)
    assert train_header.N == 15 and test_header.N == 6
    assert (train_header.F, train_header.G, train_header.V) == (4, 2, 32)
    assert formats.load_label_names(train) == ["class0", "class1", "class2"]
    for rec in train_records + test_records:
        rec.validate(train_header)


def test_gen_deterministic(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(GEN + ["--out", a]) == 0
    assert cli.main(GEN + ["--out", b]) == 0
    with open(f"{a}.train.spd1", "rb") as fa, open(f"{b}.train.spd1", "rb") as fb:
        assert fa.read() == fb.read()


def test_gen_rejects_bad_config(tmp_path):
    assert cli.main(GEN + ["--out", str(tmp_path / "x"), "--filler-fraction", "1.5"]) == 2


def test_counts_command(data, capsys):
    tmp_path, train, _ = data
    out = str(tmp_path / "c.spc1")
    assert cli.main(["counts", train, "--out", out]) == 0
    counts = vq.load_counts(out)
    _, records = formats.load_dataset(train)
    assert counts.total_frames == sum(r.T for r in records)
    err = capsys.readouterr().err
    assert f"total_frames={counts.total_frames}" in err
    assert "group0.distinct_indices=" in err


def test_counts_missing_file(tmp_path):
    assert cli.main(["counts", str(tmp_path / "nope.spd1"),
                     "--out", str(tmp_path / "c.spc1")]) == 2


def test_pool_ap_output_contract(data):
    tmp_path, train, _ = data
    out = str(tmp_path / "ap.spe1")
    assert cli.main(["pool", train, "--method", "ap", "--out", out]) == 0
    header, embs = formats.load_embeddings(out)
    assert header.D == 4 and header.N == 15
    _, records = formats.load_dataset(train)
    assert [e.id for e in embs] == [r.id for r in records]
    assert [e.label for e in embs] == [r.label for r in records]


def test_pool_sp_doubles_dimension(data):
    tmp_path, train, _ = data
    out = str(tmp_path / "sp.spe1")
    assert cli.main(["pool", train, "--method", "sp", "--out", out]) == 0
    header, _ = formats.load_embeddings(out)
    assert header.D == 8


def test_pool_gp_requires_counts(data, capsys):
    tmp_path, train, _ = data
    assert cli.main(["pool", train, "--method", "gp",
                     "--out", str(tmp_path / "gp.spe1")]) == 2
    assert "--counts" in capsys.readouterr().err


def test_pool_gp_with_counts(data):
    tmp_path, train, _ = data
    counts = str(tmp_path / "c.spc1")
    assert cli.main(["counts", train, "--out", counts]) == 0
    out = str(tmp_path / "gp.spe1")
    assert cli.main(["pool", train, "--method", "gp", "--counts", counts,
                     "--out", out]) == 0
    header, embs = formats.load_embeddings(out)
    assert header.D == 4
    assert all(np.isfinite(e.vector).all() for e in embs)


def test_pool_equality_only_for_squash(data):
    tmp_path, train, _ = data
    assert cli.main(["pool", train, "--method", "ap", "--equality", "or",
                     "--out", str(tmp_path / "x.spe1")]) == 2


def test_pool_whiten_transform(data):
    tmp_path, train, _ = data
    out = str(tmp_path / "w.spe1")
    model_path = str(tmp_path / "m.spw1")
    assert cli.main(["pool", train, "--method", "ap", "--transform", "whiten",
                     "--whitening-out", model_path, "--out", out]) == 0
    _, embs = formats.load_embeddings(out)
    X = np.stack([e.vector for e in embs]).astype(np.float64)
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / len(X)
    assert np.abs(cov - np.eye(4)).max() < 0.05
    model = transforms.load_whitening(model_path)
    assert model.mean.shape == (4,) and model.transform.shape == (4, 4)


def test_pool_softdecay_transform(data):
    tmp_path, train, _ = data
    plain, decayed = str(tmp_path / "p.spe1"), str(tmp_path / "d.spe1")
    assert cli.main(["pool", train, "--method", "ap", "--out", plain]) == 0
    assert cli.main(["pool", train, "--method", "ap", "--transform", "softdecay",
                     "--alpha", "-0.6", "--out", decayed]) == 0
    _, a = formats.load_embeddings(plain)
    _, b = formats.load_embeddings(decayed)
    sa = np.linalg.svd(np.stack([e.vector for e in a]), compute_uv=False)
    sb = np.linalg.svd(np.stack([e.vector for e in b]), compute_uv=False)
    assert sb[0] == pytest.approx(sa[0], rel=1e-4)      # top singular value kept
    assert sb[-1] / sb[0] > sa[-1] / sa[0]              # spectrum flattened


def test_bench_self_is_perfect(data, capsys):
    tmp_path, train, _ = data
    assert cli.main(["bench", "--train", train, "--test", train,
                     "--method", "ap", "--k", "1"]) == 0
    out = capsys.readouterr().out
    assert "accuracy=1.0000" in out


def test_bench_counts_built_from_train(data, capsys):
    tmp_path, train, test = data
    assert cli.main(["bench", "--train", train, "--test", test,
                     "--method", "bp"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("accuracy=")
    assert "n_test=6" in out


def test_bench_ann_and_confusion(data, capsys):
    tmp_path, train, test = data
    confusion = tmp_path / "conf.tsv"
    assert cli.main(["bench", "--train", train, "--test", test, "--method", "ap",
                     "--index", "ann", "--trees", "4", "--leaf-size", "4",
                     "--confusion-out", str(confusion)]) == 0
    lines = confusion.read_text().splitlines()
    assert lines[0] == "true\tpredicted\tcount"
    assert sum(int(l.split("\t")[2]) for l in lines[1:]) == 6


def test_bench_rejects_mismatched_datasets(data, tmp_path):
    _, train, _ = data
    other = str(tmp_path / "o")
    assert cli.main(GEN + ["--out", other, "--F", "6"]) == 0
    assert cli.main(["bench", "--train", train, "--test", f"{other}.test.spd1",
                     "--method", "ap"]) == 2


def test_export_and_compare_weights(data, capsys):
    tmp_path, train, _ = data
    counts = str(tmp_path / "c.spc1")
    assert cli.main(["counts", train, "--out", counts]) == 0
    ap_w, gp_w = str(tmp_path / "ap.tsv"), str(tmp_path / "gp.tsv")
    assert cli.main(["export-weights", train, "--method", "ap", "--out", ap_w]) == 0
    assert cli.main(["export-weights", train, "--method", "gp",
                     "--counts", counts, "--out", gp_w]) == 0
    capsys.readouterr()
    assert cli.main(["compare-weights", ap_w, ap_w]) == 0
    out = capsys.readouterr().out
    assert "mean=0.000000" in out and "median=0.000000" in out
    assert cli.main(["compare-weights", ap_w, gp_w]) == 0
    out = capsys.readouterr().out
    mean = float(next(l for l in out.splitlines() if l.startswith("mean=")).split("=")[1])
    assert mean > 0.0


def test_export_weights_sp_fails(data):
    _, train, _ = data
    assert cli.main(["export-weights", train, "--method", "sp"]) == 2


def test_export_embeddings(data):
    tmp_path, train, _ = data
    prefix = str(tmp_path / "emb")
    assert cli.main(["export-embeddings", train, "--method", "ap",
                     "--out", prefix]) == 0
    header, embs = formats.load_embeddings(f"{prefix}.spe1")
    lines = (tmp_path / "emb.tsv").read_text().splitlines()
    assert len(lines) == header.N == 15
    assert lines[0].split("\t")[0] == embs[0].id


def test_threads_env_var(data, monkeypatch):
    tmp_path, train, _ = data
    monkeypatch.setenv("VQPOOL_THREADS", "2")
    assert cli.main(["pool", train, "--method", "ap",
                     "--out", str(tmp_path / "t.spe1")]) == 0
    monkeypatch.setenv("VQPOOL_THREADS", "zebra")
    assert cli.main(["pool", train, "--method", "ap",
                     "--out", str(tmp_path / "t2.spe1")]) == 2


def test_unknown_method_exits_2(data):
    tmp_path, train, _ = data
    assert cli.main(["pool", train, "--method", "zzz",
                     "--out", str(tmp_path / "x.spe1")]) == 2
