"""Durable single-node store: append-only write-ahead record plus snapshots.

Every mutation is one WAL record carrying the full outcome (new observation,
vote plus recomputed consensus, resolution plus reliability deltas), so one
logical action is either wholly applied after a crash or not at all, and
replay is pure data application independent of configuration drift. Images and
other large payloads live in a content-addressed blob area keyed by SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

from filelock import FileLock, Timeout

from .errors import StorageFailure, StoreLocked

WAL_FILE = "wal.jsonl"
SNAPSHOT_FILE = "snapshot.json"
LOCK_FILE = "LOCK"
BLOB_DIR = "blobs"

DEFAULT_SNAPSHOT_EVERY = 500


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


class BlobStore:
    """Content-addressed blobs under <root>/blobs/<aa>/<sha256>."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, ref: str) -> Path:
        return self.root / ref[:2] / ref

    def put(self, data: bytes) -> str:
        """Store bytes, returning their SHA-256 ref; identical bytes store once."""
        ref = hashlib.sha256(data).hexdigest()
        target = self.path_for(ref)
        if target.exists():
            return ref
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".tmp")
        try:
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, target)
        except OSError as exc:
            raise StorageFailure(f"blob write failed: {exc}") from exc
        return ref

    def get(self, ref: str) -> bytes:
        try:
            return self.path_for(ref).read_bytes()
        except OSError as exc:
            raise StorageFailure(f"blob {ref} unreadable: {exc}") from exc

    def has(self, ref: str) -> bool:
        return self.path_for(ref).exists()


class StoredState:
    """In-memory platform state, rebuilt exactly by snapshot + WAL replay.

    apply() is pure data application: every nondeterministic or
    config-dependent value (ids, timestamps, computed consensus, reliability
    deltas) is already frozen inside the event.
    """

    def __init__(self):
        self.taxonomy_version: int = 0
        self.taxonomy_ref: str | None = None
        self.users: dict[str, dict] = {}
        self.observations: dict[str, dict] = {}
        self.votes: dict[str, dict[str, dict]] = {}
        self.results: dict[str, dict] = {}
        self.history: dict[str, list[int]] = {}
        self.idempotency: dict[str, dict] = {}
        self.next_observation: int = 1
        self.next_vote: int = 1

    # -- event application ------------------------------------------------

    def apply(self, event: dict) -> None:
        handler = getattr(self, f"_apply_{event['type']}", None)
        if handler is None:
            raise StorageFailure(f"unknown event type {event['type']!r}")
        handler(event)
        key = event.get("idem_key")
        if key:
            self.idempotency[key] = {
                "endpoint": event.get("endpoint", event["type"]),
                "response": event.get("response"),
            }

    def _apply_taxonomy_loaded(self, event: dict) -> None:
        self.taxonomy_version = event["version"]
        self.taxonomy_ref = event["ref"]

    def _apply_user_added(self, event: dict) -> None:
        user = event["user"]
        self.users[user["user_id"]] = dict(user)

    def _apply_observation_added(self, event: dict) -> None:
        record = event["observation"]
        obs_id = record["observation_id"]
        self.observations[obs_id] = dict(record)
        self.votes.setdefault(obs_id, {})
        self.results[obs_id] = dict(event["consensus"])
        self.next_observation = max(self.next_observation, event["obs_seq"] + 1)

    def _apply_vote_cast(self, event: dict) -> None:
        vote = event["vote"]
        self.votes[vote["observation_id"]][vote["user_id"]] = dict(vote)
        self.results[vote["observation_id"]] = dict(event["consensus"])
        self.next_vote = max(self.next_vote, event["vote_seq"] + 1)

    def _apply_expert_resolved(self, event: dict) -> None:
        vote = event["vote"]
        obs_id = vote["observation_id"]
        self.votes[obs_id][vote["user_id"]] = dict(vote)
        self.results[obs_id] = dict(event["consensus"])
        for user_id, resolved, correct in event["reliability"]:
            self.history[user_id] = [resolved, correct]
        self.next_vote = max(self.next_vote, event["vote_seq"] + 1)

    def _apply_classification_completed(self, event: dict) -> None:
        record = self.observations[event["observation_id"]]
        record["machine_result"] = event["machine_result"]
        record["raw_probs_ref"] = event["raw_probs_ref"]
        record["screening"] = event["screening"]
        record["classification_pending"] = False

    # -- snapshots ----------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "taxonomy_version": self.taxonomy_version,
            "taxonomy_ref": self.taxonomy_ref,
            "users": self.users,
            "observations": self.observations,
            "votes": self.votes,
            "results": self.results,
            "history": self.history,
            "idempotency": self.idempotency,
            "next_observation": self.next_observation,
            "next_vote": self.next_vote,
        }

    @classmethod
    def from_snapshot(cls, data: dict) -> "StoredState":
        state = cls()
        state.taxonomy_version = data["taxonomy_version"]
        state.taxonomy_ref = data["taxonomy_ref"]
        state.users = data["users"]
        state.observations = data["observations"]
        state.votes = data["votes"]
        state.results = data["results"]
        state.history = {k: list(v) for k, v in data["history"].items()}
        state.idempotency = data["idempotency"]
        state.next_observation = data["next_observation"]
        state.next_vote = data["next_vote"]
        return state

    def canonical_json(self) -> str:
        """Stable serialization used for byte-identical state comparisons."""
        return json.dumps(self.to_snapshot(), sort_keys=True, separators=(",", ":"))


class Store:
    """WAL-backed store rooted at a directory, with advisory locking.

    One writer at a time: opening writable acquires <root>/LOCK and fails fast
    with StoreLocked when a live service already holds it. Read-only opens
    skip the lock and never touch the WAL.
    """

    def __init__(
        self,
        root: str | Path,
        read_only: bool = False,
        snapshot_every: int = DEFAULT_SNAPSHOT_EVERY,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.read_only = read_only
        self.snapshot_every = snapshot_every
        self.blobs = BlobStore(self.root / BLOB_DIR)
        self.state = StoredState()
        self.last_seq = 0
        self._mutation_lock = threading.RLock()
        self._wal_fh = None
        self._lock: FileLock | None = None

        if not read_only:
            self._lock = FileLock(str(self.root / LOCK_FILE))
            try:
                self._lock.acquire(timeout=0.2)
            except Timeout:
                raise StoreLocked(
                    f"store {self.root} is locked by another process; "
                    "use read-only mode or stop the service"
                ) from None
        self._load()
        if not read_only:
            self._wal_fh = open(self.wal_path, "a", encoding="utf-8")
            self._appends_since_snapshot = 0

    @property
    def wal_path(self) -> Path:
        return self.root / WAL_FILE

    @property
    def snapshot_path(self) -> Path:
        return self.root / SNAPSHOT_FILE

    def _load(self) -> None:
        if self.snapshot_path.exists():
            with open(self.snapshot_path, encoding="utf-8") as fh:
                snap = json.load(fh)
            self.state = StoredState.from_snapshot(snap["state"])
            self.last_seq = snap["last_seq"]
        for event in self._read_wal():
            if event["seq"] <= self.last_seq:
                continue
            self.state.apply(event)
            self.last_seq = event["seq"]

    def _read_wal(self) -> Iterator[dict]:
        if not self.wal_path.exists():
            return
        with open(self.wal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError:
                    # A torn final line from a crash mid-append is expected;
                    # everything before it is intact.
                    return

    # -- mutation -----------------------------------------------------------

    def append(self, event: dict) -> dict:
        """Durably append one event and apply it to state."""
        if self.read_only:
            raise StorageFailure("store opened read-only")
        with self._mutation_lock:
            event = dict(event)
            event["seq"] = self.last_seq + 1
            line = json.dumps(event, sort_keys=True, separators=(",", ":"))
            try:
                self._wal_fh.write(line + "\n")
                self._wal_fh.flush()
                os.fsync(self._wal_fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"WAL append failed: {exc}") from exc
            self.state.apply(event)
            self.last_seq = event["seq"]
            self._appends_since_snapshot += 1
            if self._appends_since_snapshot >= self.snapshot_every:
                self.snapshot()
            return event

    def snapshot(self) -> None:
        """Write an atomic snapshot and truncate the WAL."""
        if self.read_only:
            raise StorageFailure("store opened read-only")
        with self._mutation_lock:
            payload = {"last_seq": self.last_seq, "state": self.state.to_snapshot()}
            tmp = self.snapshot_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.snapshot_path)
            _fsync_dir(self.root)
            # Records at or below last_seq are skipped on replay, so a crash
            # between replace and truncate only leaves redundant lines behind.
            self._wal_fh.close()
            self._wal_fh = open(self.wal_path, "w", encoding="utf-8")
            self._wal_fh.flush()
            os.fsync(self._wal_fh.fileno())
            self._appends_since_snapshot = 0

    def mutate(self) -> threading.RLock:
        """The store-wide writer lock; platform-level actions hold it across
        read-compute-append so WAL order matches decision order."""
        return self._mutation_lock

    def close(self) -> None:
        if self._wal_fh is not None:
            self._wal_fh.close()
            self._wal_fh = None
        if self._lock is not None and self._lock.is_locked:
            self._lock.release()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def put_json_blob(blobs: BlobStore, payload: Any) -> str:
    return blobs.put(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8"))


def get_json_blob(blobs: BlobStore, ref: str) -> Any:
    return json.loads(blobs.get(ref).decode("utf-8"))
