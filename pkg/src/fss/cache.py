"""Append-only JSONL cache for Monte Carlo tallies.

One file per canonical sweep configuration (name = sha256 of the sorted-key
JSON config); each line is one grid point's raw tallies.  Appending never
rewrites history, so interrupted sweeps resume from whatever was flushed.
Corrupt lines are skipped with a warning rather than failing the run.
"""
import hashlib
import json
import os
import warnings


def cache_root():
    """Cache directory from FSS_CACHE_DIR, or None when caching is off."""
    return os.environ.get("FSS_CACHE_DIR") or None


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:24]


class ResultCache:

    def __init__(self, root):
        self.root = root

    def _path(self, name):
        return os.path.join(self.root, name + ".jsonl")

    def load(self, name):
        """All intact records in the file, oldest first."""
        records = []
        path = self._path(name)
        if not os.path.exists(path):
            return records
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    warnings.warn("skipping corrupt cache line %d in %s"
                                  % (lineno, path))
        return records

    def append(self, name, record):
        os.makedirs(self.root, exist_ok=True)
        with open(self._path(name), "a") as f:
            f.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            f.write("\n")
