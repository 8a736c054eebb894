"""Content-addressed on-disk cache for pipeline artifacts.

Artifacts live at ``<root>/<kind>/<fingerprint[:2]>/<fingerprint>`` with a
sidecar ``.manifest.json`` recording the key inputs and a content hash.
Writes go to a temp file in the same directory followed by an atomic
rename, so readers never observe partial artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path


class StoreError(OSError):
    pass


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class ArtifactKey:
    kind: str
    fingerprint: str
    inputs: tuple = ()  # canonical (name, value) pairs, kept for manifests

    @staticmethod
    def from_inputs(kind: str, **inputs) -> "ArtifactKey":
        items = tuple(sorted(inputs.items()))
        digest = hashlib.sha256(_canonical({"kind": kind, "inputs": dict(items)})).hexdigest()
        return ArtifactKey(kind=kind, fingerprint=digest, inputs=items)


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _paths(self, key: ArtifactKey) -> tuple[Path, Path]:
        base = self.root / key.kind / key.fingerprint[:2]
        return base / key.fingerprint, base / f"{key.fingerprint}.manifest.json"

    def put(self, key: ArtifactKey, data: bytes) -> Path:
        path, manifest_path = self._paths(key)
        if path.exists():
            return path  # content-addressed: identical key means identical content
        path.parent.mkdir(parents=True, exist_ok=True)
        manifest = {
            "kind": key.kind,
            "fingerprint": key.fingerprint,
            "inputs": dict(key.inputs),
            "size": len(data),
            "sha256": hashlib.sha256(data).hexdigest(),
        }
        try:
            for target, payload in ((path, data), (manifest_path, _canonical(manifest))):
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
                try:
                    with os.fdopen(fd, "wb") as fh:
                        fh.write(payload)
                    os.replace(tmp, target)
                except BaseException:
                    if os.path.exists(tmp):
                        os.unlink(tmp)
                    raise
        except OSError as exc:
            raise StoreError(f"cannot store artifact at {path}: {exc}") from exc
        return path

    def get(self, key: ArtifactKey) -> bytes | None:
        path, manifest_path = self._paths(key)
        if not path.exists():
            return None
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise StoreError(f"cannot read artifact at {path}: {exc}") from exc
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text())
            if hashlib.sha256(data).hexdigest() != manifest.get("sha256"):
                raise StoreError(f"checksum mismatch for artifact {path}")
        return data

    def invalidate(self, dataset_id: str) -> int:
        """Remove every artifact whose key embeds the dataset id."""
        removed = 0
        for manifest_path in self.root.glob("*/*/*.manifest.json"):
            manifest = json.loads(manifest_path.read_text())
            if manifest.get("inputs", {}).get("dataset") == dataset_id:
                artifact = manifest_path.with_name(manifest["fingerprint"])
                for p in (artifact, manifest_path):
                    if p.exists():
                        p.unlink()
                removed += 1
        return removed
