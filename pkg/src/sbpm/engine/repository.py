"""Content-addressed bundle storage on the local filesystem."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from sbpm.compiler import Bundle, bundle_to_bytes
from sbpm.compiler.bundle import bundle_from_bytes
from sbpm.engine.errors import UnknownBundle


class BundleRepository:
    def __init__(self, root: "Path | str"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, bundle_hash: str) -> Path:
        return self.root / f"{bundle_hash}.sbpmb"

    def deploy(self, data: bytes) -> str:
        """Store bundle bytes by content hash; idempotent, atomic, validating."""
        bundle = bundle_from_bytes(data)  # raises MalformedBundle/CorruptBundle
        bundle_hash = bundle.manifest.content_hash
        target = self._path(bundle_hash)
        if target.exists():
            return bundle_hash
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return bundle_hash

    def deploy_bundle(self, bundle: Bundle) -> str:
        return self.deploy(bundle_to_bytes(bundle))

    def load(self, bundle_hash: str) -> Bundle:
        path = self._path(bundle_hash)
        if not path.is_file():
            raise UnknownBundle(bundle_hash)
        return bundle_from_bytes(path.read_bytes())

    def load_bytes(self, bundle_hash: str) -> bytes:
        path = self._path(bundle_hash)
        if not path.is_file():
            raise UnknownBundle(bundle_hash)
        return path.read_bytes()

    def exists(self, bundle_hash: str) -> bool:
        return self._path(bundle_hash).is_file()

    def list(self) -> list[dict]:
        entries = []
        for path in self.root.glob("*.sbpmb"):
            try:
                bundle = bundle_from_bytes(path.read_bytes())
            except Exception:
                continue  # ignore foreign files in the data dir
            entries.append(
                {
                    "hash": bundle.manifest.content_hash,
                    "process": bundle.manifest.process_id,
                    "name": bundle.manifest.name,
                    "version": bundle.manifest.version,
                    "subjects": list(bundle.subject_ids()),
                }
            )
        return sorted(entries, key=lambda e: (e["name"], e["hash"]))
