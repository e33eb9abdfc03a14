import json

import pytest

from exagree.runs import RunError, RunManifest, StageOrderError, list_runs


def test_save_load_byte_identical(tmp_path):
    m = RunManifest.create(tmp_path / "r1", run_id="abc")
    m.seeds["data"] = 7
    m.config["x"] = {"y": 1}
    m.save()
    first = (tmp_path / "r1" / "manifest.json").read_bytes()
    loaded = RunManifest.load(tmp_path / "r1")
    loaded.save()
    assert (tmp_path / "r1" / "manifest.json").read_bytes() == first
    assert loaded.run_id == "abc"
    assert loaded.seeds == {"data": 7}


def test_stage_order_enforced(tmp_path):
    m = RunManifest.create(tmp_path / "r")
    with pytest.raises(StageOrderError, match="data stage missing"):
        m.mark_stage("reference")
    m.mark_stage("data")
    m.mark_stage("reference")
    with pytest.raises(StageOrderError, match="dman stage missing"):
        m.require_stage("dman")
    with pytest.raises(RunError):
        m.mark_stage("nonsense")


def test_artifact_hash_verification(tmp_path):
    run = tmp_path / "r"
    m = RunManifest.create(run)
    (run / "blob.csv").write_text("a,b\n1,2\n")
    m.record_artifact("blob.csv")
    m.save()
    RunManifest.load(run)  # clean verify
    (run / "blob.csv").write_text("a,b\n9,9\n")
    with pytest.raises(RunError, match="hash mismatch"):
        RunManifest.load(run)
    (run / "blob.csv").unlink()
    with pytest.raises(RunError, match="missing artifact"):
        RunManifest.load(run)


def test_record_missing_artifact(tmp_path):
    m = RunManifest.create(tmp_path / "r")
    with pytest.raises(RunError, match="not found"):
        m.record_artifact("nope.bin")


def test_list_runs_skips_junk(tmp_path):
    RunManifest.create(tmp_path / "good", run_id="g1")
    (tmp_path / "junk").mkdir()
    (tmp_path / "junk" / "notes.txt").write_text("hi")
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "manifest.json").write_text(json.dumps({"run_id": "b"}))
    runs = list_runs(tmp_path)
    ids = [m.run_id for m in runs]
    assert "g1" in ids
    assert list_runs(tmp_path / "absent") == []


def test_targets_listing(tmp_path):
    m = RunManifest.create(tmp_path / "r")
    assert m.list_targets() == []
    tdir = tmp_path / "r" / "targets" / "t9"
    tdir.mkdir(parents=True)
    (tdir / "target.json").write_text("{}")
    (tmp_path / "r" / "targets" / "incomplete").mkdir()
    assert m.list_targets() == ["t9"]
