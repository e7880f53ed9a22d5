import csv
import json
import os

import pytest

from collection_forge.cli import main
from collection_forge.datagen import topic_raster
from collection_forge.features import load_ppm, save_ppm
from collection_forge.persist import read_json

SMALL_SYNTH = {
    "topics": 3, "users": 6, "clicked_per_user": 4, "boards_pos": 3,
    "boards_neg": 6, "images_per_board": 5, "boards_per_topic": 5,
}


@pytest.fixture()
def workdir(tmp_path):
    cfg = {"synth": SMALL_SYNTH,
           "dict": {"atoms_per_unit": 4, "lam": 0.15, "epochs": 3},
           "encode": {"variant": "huber-g", "lam": 0.1}}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    return str(tmp_path), str(cfg_path)


def run(workdir, *argv):
    return main(["--workdir", workdir, *argv])


def test_full_pipeline(workdir, capsys):
    wd, cfg = workdir
    for stage in (["synth"], ["dict-learn"], ["encode", "--variant", "huber-g"],
                  ["metric-train", "--metric", "diag"], ["eval"]):
        assert run(wd, stage[0], *stage[1:], "--config", cfg, "--seed", "7") == 0
    report = read_json(os.path.join(wd, "report.json"))
    assert "map_at_5" in report
    assert report["variant"] == "huber-g"
    assert report["metric_variant"] == "diag"
    assert set(report["global"]) == {str(k) for k in range(1, 11)}
    out = capsys.readouterr().out
    assert "MAP@K" in out


def test_missing_inputs_exit_2(tmp_path, capsys):
    assert run(str(tmp_path), "dict-learn") == 2
    assert "error" in capsys.readouterr().err


def test_random_baseline_eval(workdir, capsys):
    wd, cfg = workdir
    assert run(wd, "synth", "--config", cfg, "--seed", "1") == 0
    assert run(wd, "eval", "--config", cfg, "--seed", "1",
               "--random-baseline", "--k", "5") == 0
    out = capsys.readouterr().out
    assert "random baseline MAP@5" in out


def test_rank_writes_csv(workdir):
    wd, cfg = workdir
    for stage in (["synth"], ["dict-learn"], ["encode"],
                  ["metric-train", "--metric", "eucl"]):
        assert run(wd, stage[0], *stage[1:], "--config", cfg, "--seed", "3") == 0
    assert run(wd, "rank", "--config", cfg, "--seed", "3",
               "--user", "user-000") == 0
    with open(os.path.join(wd, "ranked-user-000.csv")) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["rank", "collection_id", "distance", "relevant"]
    assert len(rows) == 1 + SMALL_SYNTH["boards_pos"] + SMALL_SYNTH["boards_neg"]
    assert run(wd, "rank", "--config", cfg, "--user", "nobody") == 2


def test_eval_refuses_mixed_variants(workdir):
    wd, cfg = workdir
    for stage in (["synth"], ["dict-learn"], ["encode"],
                  ["metric-train", "--metric", "eucl"]):
        assert run(wd, stage[0], *stage[1:], "--config", cfg, "--seed", "2") == 0
    sidecar = os.path.join(wd, "descriptors.jsonl")
    with open(sidecar) as fh:
        lines = [json.loads(l) for l in fh if l.strip()]
    lines[0]["variant"] = "avg-l1"
    with open(sidecar, "w") as fh:
        for rec in lines:
            fh.write(json.dumps(rec) + "\n")
    assert run(wd, "eval", "--config", cfg, "--seed", "2") == 2


def test_extract_from_ppm_tree(tmp_path):
    images = tmp_path / "images"
    for topic in range(2):
        coll = images / f"coll-{topic}"
        coll.mkdir(parents=True)
        for i in range(2):
            (coll / f"img-{i}.ppm").write_bytes(save_ppm(topic_raster(topic, i)))
    wd = str(tmp_path / "work")
    os.makedirs(wd)
    assert main(["--workdir", wd, "extract", "--images", str(images)]) == 0
    manifest = read_json(os.path.join(wd, "features.json"))
    assert manifest["rows"] == 4
    assert main(["--workdir", wd, "extract",
                 "--images", str(tmp_path / "empty")]) == 2


def test_thread_cap_respected(workdir, monkeypatch):
    wd, cfg = workdir
    monkeypatch.setenv("COLLECTION_FORGE_THREADS", "1")
    assert run(wd, "synth", "--config", cfg, "--seed", "5") == 0
    assert run(wd, "dict-learn", "--config", cfg, "--seed", "5") == 0
    assert run(wd, "encode", "--config", cfg, "--seed", "5") == 0
    sidecar = os.path.join(wd, "descriptors.jsonl")
    assert os.path.exists(sidecar)


def test_ppm_helper_roundtrip():
    img = topic_raster(1, 2)
    assert load_ppm(save_ppm(img)).pixels.tolist() == img.pixels.tolist()
