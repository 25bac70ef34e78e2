"""Run manifests: enough to reproduce any CLI output byte for byte.

A manifest records the command, the fully resolved configuration, SHA-256
digests of every input file's raw bytes, the seed, and the tool version.  No
timestamps, so reruns on identical inputs produce identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import metadata


def tool_version() -> str:
    try:
        return metadata.version("tenbed")
    except metadata.PackageNotFoundError:
        return "unknown"


def sha256_of_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    version: str = field(default_factory=tool_version)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_of_file(path)

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "tool_version": self.version,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
