# utils/manifest.py
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterable, List

from config.settings import TOOL_VERSION
from utils.schemas import validate_artifact

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_digest(path: str) -> str:
    """SHA-256 of a file, or of every file below a directory in sorted order"""
    sha = hashlib.sha256()
    if os.path.isdir(path):
        for root, dirs, files in os.walk(path):
            dirs.sort()
            for name in sorted(files):
                if name == MANIFEST_NAME:
                    continue
                full = os.path.join(root, name)
                sha.update(os.path.relpath(full, path).encode("utf-8"))
                with open(full, "rb") as f:
                    sha.update(f.read())
        return sha.hexdigest()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha.update(chunk)
    return sha.hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to the outputs of every command"""

    command: str
    config: Dict[str, Any]
    seed: int
    inputs: List[Dict[str, str]] = field(default_factory=list)
    outputs: List[Dict[str, str]] = field(default_factory=list)
    tool_version: str = TOOL_VERSION
    started_at: str = field(default_factory=lambda: datetime.now().isoformat())
    duration_s: float = 0.0

    def add_inputs(self, paths: Iterable[str]):
        for path in paths:
            if path and os.path.exists(path):
                self.inputs.append({"path": path, "sha256": file_digest(path)})

    def add_outputs(self, paths: Iterable[str]):
        for path in paths:
            if path and os.path.exists(path):
                self.outputs.append({"path": path, "sha256": file_digest(path)})

    def finish(self, started: datetime):
        self.duration_s = (datetime.now() - started).total_seconds()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def write_manifest(manifest: RunManifest, out_dir: str) -> str:
    """Write ``manifest.json`` into ``out_dir`` and return its path"""
    os.makedirs(out_dir, exist_ok=True)
    filepath = os.path.join(out_dir, MANIFEST_NAME)
    document = json.loads(json.dumps(manifest.to_dict(), default=str))
    validate_artifact(document, "manifest")
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    logger.info(f"Manifest written to {filepath}")
    return filepath
