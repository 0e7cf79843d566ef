"""On-disk run records.

A run directory holds::

    manifest.json        config echo, code version, timestamps, status,
                         snapshot list, content hashes
    snapshots/NNNN.snap  w, ur, uz at each snapshot time
    diagnostics.csv      one row per snapshot
    reports/*.json       fits and checks derived from the snapshots

The manifest hash is a git-style tree hash over the blob hashes of every
listed file, so any change to a listed file changes it.
"""

from __future__ import annotations

import datetime as _dt
import json
from pathlib import Path

from .. import __version__
from ..transport import VelocityHistory
from .io import git_blob_hash, read_snapshot, tree_hash, write_json

__all__ = ["RunRecord", "STATUS_COMPLETE", "STATUS_INCOMPLETE", "STATUS_UNDER_RESOLVED"]

STATUS_RUNNING = "running"
STATUS_COMPLETE = "complete"
STATUS_INCOMPLETE = "incomplete"
STATUS_UNDER_RESOLVED = "under_resolved"

MANIFEST = "manifest.json"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class RunRecord:
    """Handle on a run directory and its manifest."""

    def __init__(self, directory, manifest: dict):
        self.directory = Path(directory)
        self.manifest = manifest

    # -- creation ----------------------------------------------------------
    @classmethod
    def create(cls, directory, config_echo: dict, source: str = "") -> "RunRecord":
        d = Path(directory)
        (d / "snapshots").mkdir(parents=True, exist_ok=True)
        (d / "reports").mkdir(exist_ok=True)
        manifest = {
            "format": "axieuler-run",
            "format_version": 1,
            "code_version": __version__,
            "config": config_echo,
            "config_source": source,
            "config_hash": tree_hash({"config": json.dumps(config_echo, sort_keys=True)}),
            "started": _now(),
            "finished": None,
            "status": STATUS_RUNNING,
            "error": None,
            "flags": [],
            "snapshots": [],
            "diagnostics_csv": None,
            "reports": [],
            "files": {},
            "hash": None,
        }
        rec = cls(d, manifest)
        rec.flush()
        return rec

    @classmethod
    def load(cls, directory) -> "RunRecord":
        d = Path(directory)
        try:
            manifest = json.loads((d / MANIFEST).read_text())
        except FileNotFoundError as exc:
            raise FileNotFoundError(f"{d}: no {MANIFEST}") from exc
        return cls(d, manifest)

    # -- bookkeeping -------------------------------------------------------
    def add_snapshot(self, rel_path: str, t: float):
        self.manifest["snapshots"].append({"file": rel_path, "t": float(t)})
        self.flush()

    def flag(self, message: str):
        if message not in self.manifest["flags"]:
            self.manifest["flags"].append(message)

    def finish(self, status: str, error: str | None = None):
        self.manifest["status"] = status
        self.manifest["error"] = error
        self.manifest["finished"] = _now()
        self.flush()

    def listed_files(self) -> list:
        files = [s["file"] for s in self.manifest["snapshots"]]
        if self.manifest.get("diagnostics_csv"):
            files.append(self.manifest["diagnostics_csv"])
        files.extend(self.manifest.get("reports", []))
        return files

    def rehash(self):
        entries = {f: git_blob_hash(self.directory / f) for f in self.listed_files()
                   if (self.directory / f).exists()}
        entries["<config>"] = self.manifest["config_hash"]
        self.manifest["files"] = entries
        self.manifest["hash"] = tree_hash(entries)

    def verify(self) -> bool:
        """True when every listed file still matches the stored hash."""
        stored = dict(self.manifest.get("files", {}))
        for f in self.listed_files():
            p = self.directory / f
            if not p.exists() or stored.get(f) != git_blob_hash(p):
                return False
        return tree_hash(stored) == self.manifest.get("hash")

    def flush(self):
        self.rehash()
        write_json(self.directory / MANIFEST, self.manifest)

    # -- access ------------------------------------------------------------
    @property
    def status(self) -> str:
        return self.manifest["status"]

    @property
    def complete(self) -> bool:
        return self.status in (STATUS_COMPLETE, STATUS_UNDER_RESOLVED)

    @property
    def config(self) -> dict:
        return self.manifest["config"]

    @property
    def times(self) -> list:
        return [s["t"] for s in self.manifest["snapshots"]]

    def snapshots(self):
        return [read_snapshot(self.directory / s["file"]) for s in self.manifest["snapshots"]]

    def velocity_history(self) -> VelocityHistory:
        snaps = self.snapshots()
        return VelocityHistory([s.t for s in snaps], [s.velocity() for s in snaps])
