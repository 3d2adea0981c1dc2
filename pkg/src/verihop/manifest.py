"""Run manifests: content hashes of inputs and outputs plus the exact config.

A manifest is written next to each command's primary artifact as
``<artifact>.manifest.json``. Paths are recorded exactly as given on the
command line (use relative paths for location-independent manifests), so a
rerun with the same inputs, config, and seed produces a byte-identical
manifest.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(artifact: str | Path, command: str, config: dict,
                   inputs: list[str], outputs: list[str],
                   seed: int | None, version: str) -> Path:
    manifest = {
        "command": command,
        "version": version,
        "seed": seed,
        "config": config,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": {str(p): file_sha256(p) for p in outputs},
    }
    path = Path(str(artifact) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path
