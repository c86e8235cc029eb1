"""Run manifests: what ran, on which inputs, with which config and seed.

One manifest is written per CLI invocation, before-the-fact input digests
included, so a finished (or failed) run can be audited and replayed. The
manifest is diagnostic metadata; primary outputs never embed volatile
fields like wall-clock duration, keeping them byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    seed: int | None = None
    tool_version: str = ""
    duration_s: float | None = None
    status: str = "running"
    error: str | None = None

    def write(self, manifest_dir) -> Path:
        manifest_dir = Path(manifest_dir)
        manifest_dir.mkdir(parents=True, exist_ok=True)
        path = manifest_dir / f"{self.command}.manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


class ManifestWriter:
    """Context manager that writes the manifest on success and on failure."""

    def __init__(self, command, argv, config, input_paths, seed, tool_version, manifest_dir):
        self.manifest = RunManifest(
            command=command,
            argv=list(argv),
            config=dict(config),
            inputs={str(p): file_digest(p) for p in input_paths if Path(p).is_file()},
            seed=seed,
            tool_version=tool_version,
        )
        self.manifest_dir = manifest_dir
        self._t0 = None

    def __enter__(self):
        self._t0 = time.monotonic()
        return self.manifest

    def __exit__(self, exc_type, exc, tb):
        self.manifest.duration_s = round(time.monotonic() - self._t0, 6)
        if exc is None:
            self.manifest.status = "ok"
        else:
            self.manifest.status = "failed"
            self.manifest.error = f"{exc_type.__name__}: {exc}"
        self.manifest.write(self.manifest_dir)
        return False
