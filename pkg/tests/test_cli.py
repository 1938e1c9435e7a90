import json

import numpy as np
import pytest

from xmodal import corpus as cp
from xmodal.cli import main

from conftest import unit_rows


@pytest.fixture
def synthetic_files(tmp_path):
    """Aligned 20-pair corpus on disk: text.xeb, image.xeb, pairs.tsv."""
    rows = unit_rows(20, 8, seed=0)
    a = cp.EmbeddingSet("text", 8, tuple(f"t{i}" for i in range(20)),
                        rows.astype(np.float32))
    b = cp.EmbeddingSet("image", 8, tuple(f"i{i}" for i in range(20)),
                        rows.astype(np.float32))
    text_path = tmp_path / "text.xeb"
    image_path = tmp_path / "image.xeb"
    manifest = tmp_path / "pairs.tsv"
    cp.save_embeddings(a, text_path)
    cp.save_embeddings(b, image_path)
    manifest.write_text("".join(f"t{i}\ti{i}\n" for i in range(20)))
    return tmp_path, str(text_path), str(image_path), str(manifest)


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gap_identical(synthetic_files, capsys):
    _, text, image, _ = synthetic_files
    # same vectors on both sides: gap and W2 are both zero
    code, out, _ = run(["gap", "--a", text, "--b", image, "--batch-size", "10"],
                       capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["centroid_gap"] == 0.0
    assert obj["w2_mean"] == pytest.approx(0.0, abs=1e-12)
    assert obj["manifest"]["command"] == "gap"


def test_gap_translated(tmp_path, capsys):
    rows = unit_rows(12, 4, seed=1)
    t = np.array([1.0, 2.0, 2.0, 0.0])
    a = cp.EmbeddingSet("text", 4, tuple(f"t{i}" for i in range(12)),
                        rows.astype(np.float32))
    b = cp.EmbeddingSet("image", 4, tuple(f"i{i}" for i in range(12)),
                        (rows.astype(np.float32) + t.astype(np.float32)))
    pa, pb = tmp_path / "a.xeb", tmp_path / "b.xeb"
    cp.save_embeddings(a, pa)
    cp.save_embeddings(b, pb)
    code, out, _ = run(["gap", "--a", str(pa), "--b", str(pb),
                        "--batch-size", "12"], capsys)
    obj = json.loads(out)
    assert obj["centroid_gap"] == pytest.approx(3.0, rel=1e-6)
    assert obj["w2_mean"] == pytest.approx(3.0, rel=1e-6)


def test_gap_dim_mismatch(tmp_path, capsys):
    a = cp.EmbeddingSet("text", 2, ("a",), np.ones((1, 2), dtype=np.float32))
    b = cp.EmbeddingSet("image", 3, ("b",), np.ones((1, 3), dtype=np.float32))
    pa, pb = tmp_path / "a.xeb", tmp_path / "b.xeb"
    cp.save_embeddings(a, pa)
    cp.save_embeddings(b, pb)
    code, _, err = run(["gap", "--a", str(pa), "--b", str(pb)], capsys)
    assert code != 0
    assert "dim-mismatch" in err


def test_retrieve_aligned(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    code, out, _ = run(["retrieve", "--text", text, "--image", image,
                        "--manifest", manifest, "--metric", "cosine",
                        "--k", "1,5,10"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["hit_rate_at_k"] == {"1": 1.0, "5": 1.0, "10": 1.0}


def test_retrieve_subset_deterministic(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    args = ["retrieve", "--text", text, "--image", image, "--manifest", manifest,
            "--metric", "cosine", "--subset", "10", "--seed", "7", "--k", "1,5"]
    _, out1, _ = run(args, capsys)
    _, out2, _ = run(args, capsys)
    assert out1 == out2


def test_retrieve_metric_and_model_exclusive(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    code, _, err = run(["retrieve", "--text", text, "--image", image,
                        "--manifest", manifest, "--metric", "cosine",
                        "--model", "whatever.json"], capsys)
    assert code != 0
    assert "usage" in err


def test_retrieve_ranked_tsv(synthetic_files, capsys):
    tmp_path, text, image, manifest = synthetic_files
    ranked = tmp_path / "ranked.tsv"
    code, _, _ = run(["retrieve", "--text", text, "--image", image,
                      "--manifest", manifest, "--metric", "cosine",
                      "--k", "1,5", "--ranked-out", str(ranked), "--quiet"],
                     capsys)
    assert code == 0
    lines = ranked.read_text().strip().splitlines()
    assert len(lines) == 1 + 20 * 5


def test_train_and_model_retrieve(synthetic_files, capsys):
    tmp_path, text, image, manifest = synthetic_files
    prefix = str(tmp_path / "run")
    code, out, _ = run(["train", "--text", text, "--image", image,
                        "--manifest", manifest, "--loss", "contrastive",
                        "--arch", "8", "--lr", "0.01", "--epochs", "5",
                        "--ratios", "0.6,0.2,0.2", "--out-prefix", prefix],
                       capsys)
    assert code == 0
    summary = json.loads(out)
    history = (tmp_path / "run.history.csv").read_text().strip().splitlines()
    # recompute the lr column from the decay schedule
    for line in history[1:]:
        epoch, _, _, lr = line.split(",")
        assert float(lr) == 0.01 / (1.0 + 2.0 ** (0.5 * int(epoch)))
    code, out, _ = run(["retrieve", "--text", text, "--image", image,
                        "--manifest", manifest, "--model", summary["model_file"],
                        "--k", "1,5"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["metric"] == "model"


def test_train_search_deterministic(synthetic_files, capsys):
    tmp_path, text, image, manifest = synthetic_files
    args = ["train", "--text", text, "--image", image, "--manifest", manifest,
            "--search", "--budget", "2", "--lr", "0.01", "--epochs", "2",
            "--ratios", "0.6,0.2,0.2", "--seed", "1",
            "--out-prefix", str(tmp_path / "s")]
    _, out1, _ = run(args, capsys)
    _, out2, _ = run(args, capsys)
    assert json.loads(out1)["arch"] == json.loads(out2)["arch"]


def test_train_missing_validation_split(synthetic_files, capsys):
    tmp_path, text, image, manifest = synthetic_files
    code, _, err = run(["train", "--text", text, "--image", image,
                        "--manifest", manifest, "--arch", "8",
                        "--ratios", "1.0,0.0,0.0",
                        "--out-prefix", str(tmp_path / "x")], capsys)
    assert code != 0
    assert "no-validation-split" in err


def test_heatmap(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    code, out, _ = run(["heatmap", "--text", text, "--image", image,
                        "--manifest", manifest, "--metric", "cosine",
                        "--samples", "3", "--seed", "4"], capsys)
    assert code == 0
    obj = json.loads(out)
    values = np.array(obj["values"])
    assert values.shape == (3, 3)
    # aligned corpus: diagonal dominates each row
    for i in range(3):
        assert values[i, i] == values[i].max()


def test_heatmap_empty(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    code, out, _ = run(["heatmap", "--text", text, "--image", image,
                        "--manifest", manifest, "--samples", "0"], capsys)
    assert code == 0
    assert json.loads(out)["values"] == []


def test_compare_identical_reports(synthetic_files, tmp_path, capsys):
    _, text, image, manifest = synthetic_files
    r1 = tmp_path / "r1.json"
    r2 = tmp_path / "r2.json"
    for path in (r1, r2):
        run(["retrieve", "--text", text, "--image", image, "--manifest",
             manifest, "--metric", "cosine", "--k", "1,5", "--out", str(path),
             "--quiet"], capsys)
    code, out, _ = run(["compare", str(r1), str(r2)], capsys)
    assert code == 0
    obj = json.loads(out)
    for family in obj["families"].values():
        for cell in family:
            assert cell["p_adjusted"] == 1.0


def test_ingest_check(synthetic_files, capsys):
    _, text, image, manifest = synthetic_files
    code, out, _ = run(["ingest-check", text, image, "--manifest", manifest],
                       capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["checked"][-1]["status"] == "ok"


def test_ingest_check_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.xeb"
    bad.write_bytes(b"XXXXgarbage")
    code, _, err = run(["ingest-check", str(bad)], capsys)
    assert code != 0
    assert "bad-magic" in err
