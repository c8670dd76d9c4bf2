"""Small I/O helpers: canonical JSON, hashing, path resolution."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

DATA_DIR_ENV = "POSTSCREEN_DATA_DIR"


def canonical_json(obj) -> str:
    """Deterministic JSON used for hashed or byte-compared artifacts."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def pretty_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def resolve_data_path(path: str | Path) -> Path:
    """Resolve relative data paths against $POSTSCREEN_DATA_DIR (cwd if
    unset); absolute paths pass through."""
    path = Path(path)
    if path.is_absolute():
        return path
    base = os.environ.get(DATA_DIR_ENV)
    return (Path(base) / path) if base else path
