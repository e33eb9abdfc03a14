"""Run directories: manifest, stage ordering, hashes, atomic persistence.

Layout of a run directory:

    manifest.json
    dataset.csv [+ dataset.csv.manifest.json]
    models/reference.{json,bin}
    rashomon/{masks.csv, losses.csv, attributions.csv, manifest.json}
    dman/dman.{json,bin}
    targets/<tid>/{target.json, result.json, trace.csv, search.lock}
    reports/

Stages are strictly ordered; a stage can only be marked complete when its
predecessor is. Manifests are written atomically (temp file + rename) and
artifact hashes are verified on load.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["RunError", "StageOrderError", "RunManifest", "STAGES", "list_runs"]

STAGES = ("data", "reference", "rashomon", "dman", "targets", "saem", "reports")


class RunError(RuntimeError):
    """Raised on corrupt or inconsistent run directories."""


class StageOrderError(RunError):
    """Raised when a stage is used before its prerequisites completed."""


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    run_dir: Path
    run_id: str
    created_at: float = field(default_factory=time.time)
    stages: dict[str, bool] = field(default_factory=lambda: {s: False for s in STAGES})
    seeds: dict[str, int] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)  # relpath -> sha256
    dataset: dict = field(default_factory=dict)

    @classmethod
    def create(cls, run_dir: str | Path, run_id: str | None = None) -> "RunManifest":
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = cls(run_dir=run_dir, run_id=run_id or uuid.uuid4().hex[:12])
        manifest.save()
        return manifest

    @classmethod
    def load(cls, run_dir: str | Path, verify: bool = True) -> "RunManifest":
        run_dir = Path(run_dir)
        path = run_dir / "manifest.json"
        if not path.exists():
            raise RunError(f"no manifest in {run_dir}")
        raw = json.loads(path.read_text())
        manifest = cls(
            run_dir=run_dir,
            run_id=raw["run_id"],
            created_at=raw.get("created_at", 0.0),
            stages={s: bool(raw.get("stages", {}).get(s, False)) for s in STAGES},
            seeds=raw.get("seeds", {}),
            config=raw.get("config", {}),
            artifacts=raw.get("artifacts", {}),
            dataset=raw.get("dataset", {}),
        )
        if verify:
            manifest.verify()
        return manifest

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "stages": self.stages,
            "seeds": self.seeds,
            "config": self.config,
            "artifacts": self.artifacts,
            "dataset": self.dataset,
        }

    def save(self) -> None:
        atomic_write_text(self.run_dir / "manifest.json",
                          json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def record_artifact(self, relpath: str) -> None:
        path = self.run_dir / relpath
        if not path.exists():
            raise RunError(f"artifact not found: {relpath}")
        self.artifacts[relpath] = _sha256(path)

    def verify(self) -> None:
        for relpath, digest in self.artifacts.items():
            path = self.run_dir / relpath
            if not path.exists():
                raise RunError(f"missing artifact: {relpath}")
            actual = _sha256(path)
            if actual != digest:
                raise RunError(
                    f"hash mismatch for {relpath}: manifest {digest[:12]}..., "
                    f"file {actual[:12]}...")

    def mark_stage(self, stage: str) -> None:
        if stage not in STAGES:
            raise RunError(f"unknown stage {stage!r}")
        idx = STAGES.index(stage)
        for prev in STAGES[:idx]:
            if not self.stages[prev]:
                raise StageOrderError(f"{prev} stage missing (required before {stage})")
        self.stages[stage] = True
        self.save()

    def require_stage(self, stage: str) -> None:
        if not self.stages.get(stage, False):
            raise StageOrderError(f"{stage} stage missing")

    # --- target bookkeeping -------------------------------------------------

    def targets_dir(self) -> Path:
        return self.run_dir / "targets"

    def list_targets(self) -> list[str]:
        root = self.targets_dir()
        if not root.exists():
            return []
        return sorted(d.name for d in root.iterdir()
                      if (d / "target.json").exists())


def list_runs(root: str | Path) -> list[RunManifest]:
    root = Path(root)
    runs = []
    if not root.exists():
        return runs
    for entry in sorted(root.iterdir()):
        if (entry / "manifest.json").exists():
            try:
                runs.append(RunManifest.load(entry, verify=False))
            except RunError:
                continue
    return runs
