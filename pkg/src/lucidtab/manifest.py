"""Run manifest: the reproducibility record written alongside artifacts.

One JSON document per run directory, updated atomically after every stage.
Everything outside the "volatile" block is deterministic for a given
(config, seed) on one platform; "volatile" carries wall-clock times and
write timestamps and is excluded from determinism comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from .errors import StageError

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

STAGE_ORDER = ["ingest", "preprocess", "select", "tune", "train", "evaluate", "explain", "report"]
STAGE_REQUIRES = {
    "ingest": None,
    "preprocess": "ingest",
    "select": "preprocess",
    "tune": "select",
    "train": "tune",
    "evaluate": "train",
    "explain": "train",
    "report": "evaluate",
}


class MissingArtifact(StageError):
    def __init__(self, stage: str, detail: str = ""):
        super().__init__(f"stage {stage!r} prerequisites missing{': ' + detail if detail else ''}")
        self.stage = stage


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Manifest:
    """Mutable view over the run manifest document."""

    def __init__(self, run_dir: str | Path, doc: dict | None = None):
        self.run_dir = Path(run_dir)
        self.doc = doc or {
            "format_version": FORMAT_VERSION,
            "config_hash": "",
            "config": {},
            "seed": None,
            "seeds": {},
            "dataset": {},
            "stages": {},
            "selected_features": [],
            "search": {},
            "best": {},
            "metrics": {},
            "classification_report": {},
            "artifacts": {},
            "volatile": {"written_at": "", "wall_times": {}},
        }

    @property
    def path(self) -> Path:
        return self.run_dir / MANIFEST_NAME

    @classmethod
    def load(cls, run_dir: str | Path) -> "Manifest":
        path = Path(run_dir) / MANIFEST_NAME
        if not path.exists():
            raise MissingArtifact("manifest", f"no {MANIFEST_NAME} under {run_dir}")
        with path.open() as fh:
            return cls(run_dir, json.load(fh))

    @classmethod
    def load_or_create(cls, run_dir: str | Path) -> "Manifest":
        path = Path(run_dir) / MANIFEST_NAME
        if path.exists():
            return cls.load(run_dir)
        return cls(run_dir)

    def write(self) -> None:
        self.doc["volatile"]["written_at"] = datetime.now(timezone.utc).isoformat()
        atomic_write_text(self.path, json.dumps(self.doc, indent=2, sort_keys=True) + "\n")

    # -- stage bookkeeping --------------------------------------------------

    def record_artifact(self, relpath: str) -> str:
        digest = sha256_file(self.run_dir / relpath)
        self.doc["artifacts"][relpath] = digest
        return digest

    def stage_ok(self, stage: str, wall_time: float, artifacts: list[str]) -> None:
        for rel in artifacts:
            self.record_artifact(rel)
        self.doc["stages"][stage] = {"status": "ok", "artifacts": sorted(artifacts)}
        self.doc["volatile"]["wall_times"][stage] = wall_time

    def stage_failed(self, stage: str, error: str, wall_time: float) -> None:
        self.doc["stages"][stage] = {"status": "failed", "error": error, "artifacts": []}
        self.doc["volatile"]["wall_times"][stage] = wall_time

    def require_stage(self, stage: str) -> None:
        """Raise MissingArtifact unless the prerequisite stage completed and
        its recorded artifacts still match their digests."""
        needed = STAGE_REQUIRES[stage]
        if needed is None:
            return
        info = self.doc["stages"].get(needed)
        if not info or info.get("status") != "ok":
            raise MissingArtifact(stage, f"run stage {needed!r} first")
        for rel in info.get("artifacts", []):
            full = self.run_dir / rel
            if not full.exists():
                raise MissingArtifact(stage, f"artifact {rel} missing")
            if sha256_file(full) != self.doc["artifacts"].get(rel):
                raise MissingArtifact(stage, f"artifact {rel} no longer matches its recorded digest")

    def deterministic_view(self) -> dict:
        """The document minus the volatile block, for replay comparisons."""
        view = dict(self.doc)
        view.pop("volatile", None)
        return view
