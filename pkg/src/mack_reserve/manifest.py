"""Run manifests: what ran, with which seed, and digests of everything written."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

__all__ = ["RunManifest", "sha256_file", "write_text_atomic"]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_text_atomic(path, text: str) -> Path:
    """Write UTF-8 text via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: object
    version: str
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: list = field(default_factory=list)

    def add(self, path) -> None:
        path = Path(path)
        self.outputs.append({"path": str(path), "sha256": sha256_file(path), "bytes": path.stat().st_size})

    def verify(self) -> list[str]:
        """Paths that are missing or whose content no longer matches the recorded digest."""
        bad = []
        for entry in self.outputs:
            p = Path(entry["path"])
            if not p.is_file() or sha256_file(p) != entry["sha256"]:
                bad.append(entry["path"])
        return bad

    def write(self, path) -> Path:
        self.finished = _now()
        return write_text_atomic(path, json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))
