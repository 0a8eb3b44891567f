import json
import os

import numpy as np
import pytest

from mvembed.cli import main
from mvembed.manifest import RunManifest
from mvembed.store import load_embeddings_binary, load_embeddings_text


def run(*argv):
    return main(["--quiet", *argv])


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert run("synth", "--p", "0.2", "--nodes-per-class", "30",
               "--seed", "7", "--out", str(out)) == 0
    return out


def test_synth_outputs_and_determinism(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run("synth", "--p", "0.3", "--seed", "7", "--out", str(out),
                   "--nodes-per-class", "25") == 0
    assert (a / "edges.tsv").read_bytes() == (b / "edges.tsv").read_bytes()
    assert (a / "labels.tsv").read_bytes() == (b / "labels.tsv").read_bytes()
    assert (a / "manifest.json").exists()


def test_embed_writes_artifacts(synth_dir, tmp_path):
    out = tmp_path / "emb"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "con", "--theta", "0.5", "--dim", "16",
               "--walks-mult", "1", "--seed", "3", "--out", str(out)) == 0
    labels, table = load_embeddings_text(str(out / "embeddings.txt"))
    assert table.shape == (120, 16)
    blabels, btable = load_embeddings_binary(str(out / "embeddings.bin"))
    assert blabels == labels
    assert np.array_equal(btable, table)
    assert (out / "nodes.tsv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "embed"
    assert man["args"]["theta"] == 0.5
    assert len(man["inputs"]) == 1


def test_embed_default_dim_is_128_per_view(synth_dir, tmp_path):
    out = tmp_path / "embdef"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "con", "--theta", "0.5",
               "--walks-mult", "1", "--seed", "3", "--out", str(out)) == 0
    header = (out / "embeddings.txt").read_text().split("\n", 1)[0]
    assert header == "120 256"  # 2 views x 128


def test_embed_one_space_dim_default(synth_dir, tmp_path):
    out = tmp_path / "emb1s"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "one-space", "--dim", "32",
               "--walks-mult", "1", "--seed", "3", "--out", str(out)) == 0
    _, table = load_embeddings_text(str(out / "embeddings.txt"))
    assert table.shape == (120, 32)


def test_embed_view_merging(synth_dir, tmp_path):
    out = tmp_path / "vm"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "view-merging", "--dim", "16",
               "--walks-mult", "1", "--seed", "3", "--out", str(out)) == 0
    _, table = load_embeddings_text(str(out / "embeddings.txt"))
    assert table.shape == (120, 16)


def test_embed_single_view_requires_view(synth_dir, tmp_path):
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "single-view", "--dim", "8",
               "--out", str(tmp_path / "x")) == 2
    out = tmp_path / "sv"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "single-view", "--view", "v2", "--dim", "8",
               "--walks-mult", "1", "--out", str(out)) == 0


def test_embed_unknown_view_name(synth_dir, tmp_path):
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "single-view", "--view", "nosuch", "--dim", "8",
               "--walks-mult", "1", "--out", str(tmp_path / "x")) == 2


def test_missing_input_file_exits_nonzero(synth_dir, tmp_path):
    spec = tmp_path / "task.spec"
    spec.write_text("task = multiclass\n"
                    f"network = {synth_dir / 'edges.tsv'}\n"
                    f"labels = {synth_dir / 'labels.tsv'}\n")
    assert run("eval", "--embeddings", str(tmp_path / "missing.txt"),
               "--task", str(spec), "--out", str(tmp_path / "e")) == 1
    assert run("embed", "--network", str(tmp_path / "missing.tsv"),
               "--variant", "independent", "--out", str(tmp_path / "y")) == 1


def test_invalid_flag_combinations(synth_dir, tmp_path):
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "reg", "--theta", "0.5", "--dim", "8",
               "--out", str(tmp_path / "x")) == 2
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "independent", "--gamma", "0.1", "--dim", "8",
               "--out", str(tmp_path / "y")) == 2


def test_threads_env_fallback(synth_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("MVEMBED_THREADS", "2")
    out = tmp_path / "emb2"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "independent", "--dim", "8",
               "--walks-mult", "1", "--out", str(out)) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["args"]["threads"] is None  # resolved at runtime from env


def test_jaccard_identical_views(tmp_path):
    net_file = tmp_path / "net.tsv"
    net_file.write_text("A\t0\t1\nA\t1\t2\nB\t0\t1\nB\t1\t2\n")
    out = tmp_path / "jac"
    assert run("jaccard", "--network", str(net_file), "--threshold", "0.5",
               "--histogram", "--out", str(out)) == 0
    lines = (out / "agreement.csv").read_text().strip().split("\n")
    assert lines[1].split(",")[3] == "1.0"
    assert (out / "histogram.csv").exists()


def test_eval_protocol_csv(synth_dir, tmp_path):
    emb = tmp_path / "emb"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "independent", "--dim", "16",
               "--walks-mult", "2", "--seed", "3", "--out", str(emb)) == 0
    spec = tmp_path / "task.spec"
    spec.write_text("task = multiclass\n"
                    f"network = {synth_dir / 'edges.tsv'}\n"
                    f"labels = {synth_dir / 'labels.tsv'}\n"
                    "runs = 3\n")
    out = tmp_path / "eval"
    assert run("eval", "--embeddings", str(emb / "embeddings.txt"),
               "--task", str(spec), "--logreg-max-iter", "40",
               "--out", str(out)) == 0
    lines = (out / "results.csv").read_text().strip().split("\n")
    accuracy_rows = [l for l in lines if ",accuracy," in l]
    assert len(accuracy_rows) == 1
    assert len(accuracy_rows[0].split(",")[-1].split(";")) == 3


def test_sweep_csv_rows(synth_dir, tmp_path):
    spec = tmp_path / "task.spec"
    spec.write_text("task = multiclass\n"
                    f"network = {synth_dir / 'edges.tsv'}\n"
                    f"labels = {synth_dir / 'labels.tsv'}\n"
                    "runs = 2\n")
    out = tmp_path / "sweep"
    assert run("sweep", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "con", "--grid-param", "theta",
               "--grid", "0,0.5,1.0", "--dim", "8", "--walks-mult", "1",
               "--task", str(spec), "--logreg-max-iter", "30",
               "--out", str(out)) == 0
    lines = (out / "sweep.csv").read_text().strip().split("\n")
    assert lines[0] == "param,value,model,task,metric,mean,stderr"
    acc_rows = [l for l in lines if ",accuracy," in l]
    assert len(acc_rows) == 3


def test_sweep_gamma_zero_equals_independent(synth_dir, tmp_path):
    spec = tmp_path / "task.spec"
    spec.write_text("task = multiclass\n"
                    f"network = {synth_dir / 'edges.tsv'}\n"
                    f"labels = {synth_dir / 'labels.tsv'}\n"
                    "runs = 2\n")
    sweep_out = tmp_path / "sweep0"
    assert run("sweep", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "reg", "--grid-param", "gamma", "--grid", "0",
               "--dim", "8", "--walks-mult", "1", "--seed", "5",
               "--threads", "1", "--task", str(spec),
               "--logreg-max-iter", "30", "--out", str(sweep_out)) == 0
    emb = tmp_path / "indep"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "independent", "--dim", "8", "--walks-mult", "1",
               "--seed", "5", "--threads", "1", "--out", str(emb)) == 0
    eval_out = tmp_path / "indep-eval"
    assert run("eval", "--embeddings", str(emb / "embeddings.txt"),
               "--task", str(spec), "--logreg-max-iter", "30",
               "--out", str(eval_out)) == 0
    sweep_acc = [l.split(",")[5] for l in
                 (sweep_out / "sweep.csv").read_text().splitlines()
                 if ",accuracy," in l]
    eval_acc = [l.split(",")[3] for l in
                (eval_out / "results.csv").read_text().splitlines()
                if ",accuracy," in l]
    assert sweep_acc == eval_acc  # matched seed, 1 thread: identical


def test_manifest_round_trip_and_rerun(synth_dir, tmp_path):
    out = tmp_path / "emb"
    assert run("embed", "--network", str(synth_dir / "edges.tsv"),
               "--variant", "reg", "--gamma", "0.1", "--dim", "16",
               "--walks-mult", "1", "--seed", "5", "--threads", "1",
               "--out", str(out)) == 0
    man_path = out / "manifest.json"
    man = RunManifest.read(str(man_path))
    assert man.to_json() == man_path.read_text()
    replay = tmp_path / "replay"
    assert run("rerun", str(man_path), "--out", str(replay)) == 0
    assert (replay / "embeddings.txt").read_bytes() == \
        (out / "embeddings.txt").read_bytes()
    assert (replay / "embeddings.bin").read_bytes() == \
        (out / "embeddings.bin").read_bytes()


def test_bench_runs(capsys):
    assert main(["--quiet", "bench", "--nodes", "80", "--pairs", "2000",
                 "--dim", "16"]) == 0
    out = capsys.readouterr().out
    assert "pairs/s" in out


def test_prepare_twitter(tmp_path):
    (tmp_path / "reply.txt").write_text("1 2 3\n2 3 1\n1 1 5\n")
    (tmp_path / "mention.txt").write_text("1 3 2\n4 2 1\n")
    (tmp_path / "social.txt").write_text("1 2\n2 1\n3 9\n4 2\n")
    out = tmp_path / "tw"
    assert run("prepare-twitter", "--reply", str(tmp_path / "reply.txt"),
               "--mention", str(tmp_path / "mention.txt"),
               "--social", str(tmp_path / "social.txt"),
               "--out", str(out)) == 0
    edges = (out / "edges.tsv").read_text()
    assert "reply\t1\t2\t3.0" in edges
    friends = (out / "friends.tsv").read_text().strip().split("\n")
    # (1,2) deduplicated; (3,9) dropped: 9 is not a view node; (4,2) kept
    assert sorted(friends) == ["1\t2", "2\t4"]


def test_prepare_youtube(tmp_path):
    raw = tmp_path / "yt.csv"
    raw.write_text("10,11,1\n10,11,2\n11,12,3\n10,12,5\n12,13,4\n")
    out = tmp_path / "yt"
    assert run("prepare-youtube", "--multirel", str(raw),
               "--out", str(out)) == 0
    edges = (out / "edges.tsv").read_text()
    assert "cmn-fnd\t10\t11" in edges
    assert "cmn-sub\t11\t12" in edges
    assert "cmn-vid\t10\t12" in edges
    assert "13" not in edges  # relation 4 is unmapped
    friends = (out / "friends.tsv").read_text().strip()
    assert friends == "10\t11"
