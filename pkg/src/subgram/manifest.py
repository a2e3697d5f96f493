"""Run manifests: config and input/output hashes for reproducible pipelines.

Every CLI subcommand that writes artifacts drops a ``*.manifest.json`` next
to its primary output. Manifests contain no timestamps, so re-running a
command with identical configuration and inputs rewrites every byte
identically.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .errors import DataError

MANIFEST_VERSION = 1
MANIFEST_SUFFIX = ".manifest.json"


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(primary_output: str, command: str, config: dict,
                   inputs: list[str], outputs: list[str]) -> str:
    doc = {
        "version": MANIFEST_VERSION,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "inputs": {os.path.abspath(p): file_sha256(p) for p in sorted(set(inputs))},
        "outputs": {os.path.abspath(p): file_sha256(p) for p in sorted(set(outputs))},
    }
    path = primary_output + MANIFEST_SUFFIX
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


@dataclass
class ManifestReport:
    checked: int
    missing: list[str]
    changed: list[str]

    @property
    def ok(self) -> bool:
        return not self.missing and not self.changed


def verify_manifest(path: str) -> ManifestReport:
    """Recompute the hashes recorded in one manifest."""
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: malformed manifest: {e}") from None
    if doc.get("version") != MANIFEST_VERSION:
        raise DataError(f"{path}: unsupported manifest version {doc.get('version')!r}")
    missing: list[str] = []
    changed: list[str] = []
    checked = 0
    for section in ("inputs", "outputs"):
        for file_path, digest in doc.get(section, {}).items():
            checked += 1
            if not os.path.exists(file_path):
                missing.append(file_path)
            elif file_sha256(file_path) != digest:
                changed.append(file_path)
    return ManifestReport(checked, missing, changed)


def verify_run_dir(run_dir: str) -> dict[str, ManifestReport]:
    """Verify every manifest under a run directory."""
    manifests = []
    for root, _dirs, files in os.walk(run_dir):
        for name in sorted(files):
            if name.endswith(MANIFEST_SUFFIX):
                manifests.append(os.path.join(root, name))
    if not manifests:
        raise DataError(f"no manifests found under {run_dir}")
    return {m: verify_manifest(m) for m in sorted(manifests)}
