"""Content-addressed on-disk store for moment tables.

One file per table. Layout: an 8-byte magic, a 64-byte hex sha256 of the
payload, a newline, then an ``.npz`` payload holding the arrays and a JSON
provenance record. Writes go to a temporary file that is atomically renamed
into place, so concurrent writers of the same key are harmless.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch
from .mustats import MomentTable, Provenance

MAGIC = b"FPRMU\x00\x02\n"
FORMAT_VERSION = 2
ENV_VAR = "FPR_SIM_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "fprsim"


def cache_key(provenance: Provenance, K: int) -> str:
    """Hash of every input that influences the table. Floats are hashed by their exact bits."""
    fields = dataclasses.asdict(provenance)
    record = {
        "format": FORMAT_VERSION,
        "K": int(K),
        "grid_hash": fields["grid_hash"],
        "kappa": float(fields["kappa"]).hex(),
        "min_dist_fraction": float(fields["min_dist_fraction"]).hex(),
        "n_samples": int(fields["n_samples"]),
        "seed": fields["seed"],
        "method": fields["method"],
        "chunk_size": int(fields["chunk_size"]),
        "drop_size": int(fields["drop_size"]),
    }
    blob = json.dumps(record, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class MomentCache:
    def __init__(self, root: str | os.PathLike | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.fprmu"

    def store(self, table: MomentTable) -> Path:
        key = cache_key(table.provenance, table.K)
        buf = io.BytesIO()
        arrays = {"mu_I": table.mu_I, "mu_E": table.mu_E}
        if table.se_I is not None:
            arrays["se_I"] = table.se_I
            arrays["se_E"] = table.se_E
        meta = json.dumps({"K": table.K, "provenance": dataclasses.asdict(table.provenance)})
        np.savez(buf, meta=np.frombuffer(meta.encode(), dtype=np.uint8), **arrays)
        payload = buf.getvalue()
        digest = hashlib.sha256(payload).hexdigest().encode()
        target = self.path(key)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(MAGIC + digest + b"\n" + payload)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target

    def load(self, provenance: Provenance, K: int) -> MomentTable | None:
        """Cached table, or None on a miss. Raises ChecksumMismatch for a damaged file."""
        target = self.path(cache_key(provenance, K))
        try:
            raw = target.read_bytes()
        except FileNotFoundError:
            return None
        head = len(MAGIC) + 65
        if len(raw) < head or raw[: len(MAGIC)] != MAGIC:
            raise ChecksumMismatch(f"{target}: bad header")
        digest = raw[len(MAGIC): len(MAGIC) + 64]
        payload = raw[head:]
        if hashlib.sha256(payload).hexdigest().encode() != digest:
            raise ChecksumMismatch(f"{target}: checksum mismatch")
        with np.load(io.BytesIO(payload), allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            prov = Provenance(**meta["provenance"])
            if prov != provenance or meta["K"] != K:
                raise ChecksumMismatch(f"{target}: provenance does not match its key")
            has_se = "se_I" in data.files
            return MomentTable(
                K=int(meta["K"]),
                mu_I=data["mu_I"],
                mu_E=data["mu_E"],
                se_I=data["se_I"] if has_se else None,
                se_E=data["se_E"] if has_se else None,
                provenance=prov,
            )

    def discard(self, provenance: Provenance, K: int) -> None:
        try:
            self.path(cache_key(provenance, K)).unlink()
        except FileNotFoundError:
            pass
