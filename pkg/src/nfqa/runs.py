"""Run directories, manifests, and atomic file output.

Every run writes its manifest before any result file, so each output is
attributable to exactly one manifest; starting a run with an existing
run id refuses to overwrite. All writes go through a temp file and an
atomic rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path


class RunExists(RuntimeError):
    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        super().__init__(f"run directory {run_dir} already has a manifest; refusing to overwrite")


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def write_jsonl(path: str | Path, rows) -> None:
    atomic_write_text(
        path, "".join(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n" for row in rows)
    )


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_run_dir(out_root: str | Path, run_id: str) -> Path:
    run_dir = Path(out_root) / run_id
    if (run_dir / "manifest.json").exists():
        raise RunExists(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(run_dir: Path, manifest: dict) -> None:
    atomic_write_json(run_dir / "manifest.json", manifest)


def read_manifest(run_dir: str | Path) -> dict:
    with (Path(run_dir) / "manifest.json").open(encoding="utf-8") as fh:
        return json.load(fh)
