"""Output directory writer: every artifact gets a ``.meta.json`` sidecar."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Emitter:
    """Writes text artifacts under ``root`` with provenance sidecars.

    ``meta`` (config hash, tool version) is copied into every sidecar; file
    content is hashed so sidecars also pin the bytes they describe.
    """

    def __init__(self, root, meta: dict):
        self.root = Path(root)
        self.meta = dict(meta)
        self.written: list[str] = []

    def write(self, name: str, text: str, **extra) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode()
        path.write_bytes(data)
        side = {**self.meta, **extra, "file": name, "sha256": hashlib.sha256(data).hexdigest()}
        path.with_name(path.name + ".meta.json").write_text(dump_json(side))
        self.written.append(name)
        return path

    def write_json(self, name: str, obj, **extra) -> Path:
        return self.write(name, dump_json(obj), **extra)
