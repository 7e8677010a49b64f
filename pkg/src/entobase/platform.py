"""Platform orchestration: every domain action behind the service and CLI.

Wires taxonomy, backend, screening index, consensus, and demography on top of
the WAL store. All mutations run under the store writer lock, compute their
full outcome, and persist it as a single event; reads never take the writer
lock except to copy a consistent snapshot of the rows they aggregate.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import queue
import threading
import time
from pathlib import Path
from typing import Iterable

from . import classifier, demography, screening
from .backends import backend_from_config
from .classifier import ClassificationResult, RankThresholds
from .config import AppConfig
from .consensus import (
    ConsensusEngine,
    ConsensusResult,
    ConsensusStatus,
    IdentificationVote,
    live_votes,
    user_reliability,
)
from .consensus import consensus as compute_consensus
from .demography import LabeledOccurrence
from .errors import (
    BadCursor,
    BadFilter,
    NoSuchObservation,
    NotExpert,
    ObservationQuarantined,
    OutOfRangeCoordinates,
    TaxonomyViolation,
    UnknownTaxon,
)
from .images import decode_image
from .screening import HashIndex, ScreeningStatus, ScreeningVerdict
from .store import Store, get_json_blob, put_json_blob
from .taxonomy import ROOT_ID, Rank, Taxonomy, load_taxonomy_csv

DEFAULT_PAGE_SIZE = 50
MAX_PAGE_SIZE = 500

OBSERVATION_STATUSES = {s.value for s in ConsensusStatus} | {s.value for s in ScreeningStatus}


def _encode_cursor(last_id: str) -> str:
    return base64.urlsafe_b64encode(f"after={last_id}".encode()).decode()

def _decode_cursor(cursor: str) -> str:
    try:
        text = base64.urlsafe_b64decode(cursor.encode()).decode()
    except (binascii.Error, UnicodeDecodeError) as exc:
        raise BadCursor(f"cursor is not decodable: {exc}") from exc
    if not text.startswith("after="):
        raise BadCursor("cursor has unexpected shape")
    return text[len("after="):]


class Platform:
    """One store, one taxonomy, one backend; concurrent readers, one writer."""

    def __init__(self, store: Store, config: AppConfig):
        self.store = store
        self.config = config
        self.taxonomy = self._bootstrap_taxonomy()
        self._backend = None  # built on first use; taxonomy reloads reset it
        self.index = HashIndex()
        self._load_blocklist()
        self._rebuild_index()
        if not store.read_only:
            self._sync_config_users()
        self._classify_queue: queue.Queue[str] | None = None
        self._worker: threading.Thread | None = None
        if config.defer_classification and not store.read_only:
            self._classify_queue = queue.Queue()
            self._worker = threading.Thread(target=self._classification_worker, daemon=True)
            self._worker.start()
            self._requeue_pending()

    @property
    def backend(self):
        if self._backend is None:
            self._backend = backend_from_config(self.config.backend, self.taxonomy)
        return self._backend

    # -- bootstrap ----------------------------------------------------------

    def _bootstrap_taxonomy(self) -> Taxonomy:
        state = self.store.state
        if state.taxonomy_ref:
            csv_text = self.store.blobs.get(state.taxonomy_ref).decode("utf-8")
            return load_taxonomy_csv(csv_text, version=state.taxonomy_version)
        if self.config.taxonomy_csv:
            text = Path(self.config.taxonomy_csv).read_text(encoding="utf-8")
            if self.store.read_only:
                # Usable for reads without mutating the store.
                return load_taxonomy_csv(text, version=1)
            return self.import_taxonomy(text)
        raise TaxonomyViolation(
            ["NoTaxonomy: store has no taxonomy; run import-taxonomy or set taxonomy in config"]
        )

    def _load_blocklist(self) -> None:
        if self.config.blocklist:
            text = Path(self.config.blocklist).read_text(encoding="utf-8")
            self.index.add_blocklist(screening.parse_blocklist(text))

    def _rebuild_index(self) -> None:
        for obs_id in sorted(self.store.state.observations):
            record = self.store.state.observations[obs_id]
            if record["screening"]["status"] == ScreeningStatus.ACCEPTED.value:
                self.index.add(screening.hex_to_hash(record["phash"]), obs_id)

    def _sync_config_users(self) -> None:
        for user in self.config.users:
            entry = {
                "user_id": str(user["user_id"]),
                "token": str(user.get("token", "")),
                "is_expert": bool(user.get("expert", user.get("is_expert", False))),
            }
            if self.store.state.users.get(entry["user_id"]) != entry:
                self.store.append({"type": "user_added", "user": entry})

    # -- taxonomy -----------------------------------------------------------

    def import_taxonomy(self, csv_text: str) -> Taxonomy:
        """Validate and atomically install a taxonomy table; bumps the version."""
        with self.store.mutate():
            version = self.store.state.taxonomy_version + 1
            new_taxonomy = load_taxonomy_csv(csv_text, version=version)
            for votes in self.store.state.votes.values():
                for vote in votes.values():
                    if vote["taxon_id"] not in new_taxonomy.nodes:
                        raise TaxonomyViolation(
                            [f"VoteOrphaned: existing vote names {vote['taxon_id']!r}, "
                             "not present in the new table"]
                        )
            ref = self.store.blobs.put(csv_text.encode("utf-8"))
            self.store.append({"type": "taxonomy_loaded", "version": version, "ref": ref})
            self.taxonomy = new_taxonomy
            self._backend = None  # species set may have changed
            return new_taxonomy

    def taxonomy_view(self) -> dict:
        nodes = [
            {
                "taxon_id": n.taxon_id,
                "parent_id": n.parent_id,
                "rank": n.rank.label,
                "scientific_name": n.scientific_name,
                "common_name": n.common_name,
            }
            for n in (self.taxonomy.nodes[i] for i in self.taxonomy.descend_order())
        ]
        return {"version": self.taxonomy.version, "nodes": nodes}

    def taxon_view(self, taxon_id: str) -> dict:
        node = self.taxonomy.node(taxon_id)
        return {
            "taxon_id": node.taxon_id,
            "parent_id": node.parent_id,
            "rank": node.rank.label,
            "scientific_name": node.scientific_name,
            "common_name": node.common_name,
            "children": list(self.taxonomy.children.get(taxon_id, ())),
            "lineage": self.taxonomy.ancestors_or_self(taxon_id),
        }

    # -- users --------------------------------------------------------------

    def add_user(self, user_id: str, token: str, is_expert: bool) -> dict:
        entry = {"user_id": user_id, "token": token, "is_expert": is_expert}
        with self.store.mutate():
            self.store.append({"type": "user_added", "user": entry})
        return entry

    def user_for_token(self, token: str) -> dict | None:
        if not token:
            return None
        for user in self.store.state.users.values():
            if user["token"] == token:
                return user
        return None

    def is_expert(self, user_id: str) -> bool:
        return bool(self.store.state.users.get(user_id, {}).get("is_expert", False))

    # -- idempotency ----------------------------------------------------------

    def _idempotent_replay(self, idem_key: str | None, endpoint: str) -> dict | None:
        if not idem_key:
            return None
        hit = self.store.state.idempotency.get(idem_key)
        if hit is None:
            return None
        if hit["endpoint"] != endpoint:
            raise BadFilter(f"idempotency key {idem_key!r} was used on {hit['endpoint']}")
        return json.loads(json.dumps(hit["response"]))

    # -- observations ---------------------------------------------------------

    def _weights_for(self, votes: Iterable[dict]) -> dict[str, float]:
        weights = {}
        for vote in votes:
            resolved, correct = self.store.state.history.get(vote["user_id"], (0, 0))
            weights[vote["user_id"]] = user_reliability(resolved, correct)
        return weights

    def _pending_result(self, obs_id: str) -> ConsensusResult:
        return ConsensusResult(
            observation_id=obs_id,
            status=ConsensusStatus.PENDING,
            label=None,
            share=0.0,
            total_weight=0.0,
            vote_count=0,
        )

    def render_observation(self, obs_id: str, detail: bool = False) -> dict:
        state = self.store.state
        record = state.observations.get(obs_id)
        if record is None:
            raise NoSuchObservation(obs_id)
        view = {k: v for k, v in record.items() if k != "classification_pending"}
        view["consensus"] = dict(state.results[obs_id])
        votes = state.votes.get(obs_id, {})
        live = live_votes(IdentificationVote.from_dict(v) for v in votes.values())
        view["tally"] = self._tally(live)
        if detail:
            view["votes"] = [live[u].to_dict() for u in sorted(live)]
        return view

    def _tally(self, live: dict[str, IdentificationVote]) -> dict[str, float]:
        if not live:
            return {}
        weights = self._weights_for([v.to_dict() for v in live.values()])
        total = 0.0
        per_taxon: dict[str, float] = {}
        for user_id in sorted(live):
            w = weights[user_id]
            total += w
            taxon = live[user_id].taxon_id
            per_taxon[taxon] = per_taxon.get(taxon, 0.0) + w
        return {taxon: weight / total for taxon, weight in sorted(per_taxon.items())}

    def submit_observation(
        self,
        image_bytes: bytes,
        latitude: float,
        longitude: float,
        captured_at: int,
        user_id: str,
        idem_key: str | None = None,
        source: str = "api",
        skip_gate: bool = False,
        final_label: str | None = None,
    ) -> dict:
        """Screen, classify, and persist one submission; returns the full record.

        ``final_label`` (import path) installs an EXPERT_RESOLVED consensus for
        trusted pre-labeled rows; ``skip_gate`` bypasses the no-insect gate.
        """
        replay = self._idempotent_replay(idem_key, "submit")
        if replay is not None:
            return replay
        if not (-90.0 <= latitude <= 90.0) or not (-180.0 <= longitude <= 180.0):
            raise OutOfRangeCoordinates(f"({latitude}, {longitude})")
        img = decode_image(image_bytes)

        with self.store.mutate():
            replay = self._idempotent_replay(idem_key, "submit")
            if replay is not None:
                return replay
            state = self.store.state
            image_ref = self.store.blobs.put(image_bytes)
            phash = screening.dhash64(img)
            obs_id = f"obs-{state.next_observation:08d}"
            defer = self.config.defer_classification and source == "api"

            machine_result: ClassificationResult | None = None
            raw_probs_ref: str | None = None
            match = self.index.nearest(phash, self.config.screening.d_max)
            if match is not None:
                verdict = ScreeningVerdict(
                    status=ScreeningStatus.FLAGGED_DUPLICATE,
                    matched_observation_id=match[0],
                    max_species_prob=0.0,
                    entropy=0.0,
                )
            elif defer:
                verdict = ScreeningVerdict(ScreeningStatus.ACCEPTED, None, 0.0, 0.0)
            else:
                probs, machine_result = classifier.classify_image(
                    img, self.backend, self.taxonomy, self.config.thresholds
                )
                raw_probs_ref = put_json_blob(self.store.blobs, probs)
                accepted, max_prob, ent = screening.insect_presence_gate(
                    probs,
                    min_max_prob=self.config.screening.min_max_prob,
                    max_entropy=self.config.screening.max_entropy(len(probs)),
                )
                if accepted or skip_gate:
                    verdict = ScreeningVerdict(ScreeningStatus.ACCEPTED, None, max_prob, ent)
                else:
                    verdict = ScreeningVerdict(
                        ScreeningStatus.FLAGGED_NO_INSECT, None, max_prob, ent
                    )

            record = {
                "observation_id": obs_id,
                "image_ref": image_ref,
                "phash": screening.hash_to_hex(phash),
                "latitude": latitude,
                "longitude": longitude,
                "captured_at": int(captured_at),
                "submitted_by": user_id,
                "created_at": int(time.time()),
                "source": source,
                "screening": verdict.to_dict(),
                "machine_result": machine_result.to_dict() if machine_result else None,
                "raw_probs_ref": raw_probs_ref,
                "classification_pending": defer and match is None,
            }
            if final_label is not None and verdict.status == ScreeningStatus.ACCEPTED:
                result = ConsensusResult(
                    observation_id=obs_id,
                    status=ConsensusStatus.EXPERT_RESOLVED,
                    label=final_label,
                    share=1.0,
                    total_weight=0.0,
                    vote_count=0,
                )
            else:
                result = self._pending_result(obs_id)

            event = {
                "type": "observation_added",
                "observation": record,
                "consensus": result.to_dict(),
                "obs_seq": state.next_observation,
                "idem_key": idem_key,
                "endpoint": "submit",
            }
            self.store.append(self._with_response(event))
            if verdict.status == ScreeningStatus.ACCEPTED:
                self.index.add(phash, obs_id)
            if record["classification_pending"] and self._classify_queue is not None:
                self._classify_queue.put(obs_id)
            return self.render_observation(obs_id, detail=True)

    def _with_response(self, event: dict) -> dict:
        # The rendered record IS the stored idempotent response, so compose it
        # from the event payload before applying.
        view = dict(event["observation"])
        view.pop("classification_pending", None)
        view["consensus"] = dict(event["consensus"])
        view["tally"] = {}
        view["votes"] = []
        event["response"] = view
        return event

    def propose_identification(
        self, observation_id: str, user_id: str, taxon_id: str, idem_key: str | None = None
    ) -> dict:
        replay = self._idempotent_replay(idem_key, "vote")
        if replay is not None:
            return replay
        with self.store.mutate():
            replay = self._idempotent_replay(idem_key, "vote")
            if replay is not None:
                return replay
            state = self.store.state
            record = state.observations.get(observation_id)
            if record is None:
                raise NoSuchObservation(observation_id)
            if record["screening"]["status"] == ScreeningStatus.FLAGGED_DUPLICATE.value:
                raise ObservationQuarantined(f"{observation_id} is a flagged duplicate")
            if taxon_id not in self.taxonomy.nodes or taxon_id == ROOT_ID:
                raise UnknownTaxon(taxon_id)

            vote = IdentificationVote(
                vote_id=f"vote-{state.next_vote:08d}",
                observation_id=observation_id,
                user_id=user_id,
                taxon_id=taxon_id,
                timestamp=int(time.time()),
                is_expert=self.is_expert(user_id),
            )
            current = ConsensusResult.from_dict(state.results[observation_id])
            if current.status == ConsensusStatus.EXPERT_RESOLVED:
                result = current  # stored but inert
            else:
                votes = dict(state.votes[observation_id])
                votes[user_id] = vote.to_dict()
                result = compute_consensus(
                    (IdentificationVote.from_dict(v) for v in votes.values()),
                    self.taxonomy,
                    self._weights_for(votes.values()),
                    share_threshold=self.config.share_threshold,
                    min_votes=self.config.min_votes,
                    observation_id=observation_id,
                )
            event = {
                "type": "vote_cast",
                "vote": vote.to_dict(),
                "consensus": result.to_dict(),
                "vote_seq": state.next_vote,
                "idem_key": idem_key,
                "endpoint": "vote",
                "response": result.to_dict(),
            }
            self.store.append(event)
            return result.to_dict()

    def expert_resolve(
        self, observation_id: str, user_id: str, taxon_id: str, idem_key: str | None = None
    ) -> dict:
        replay = self._idempotent_replay(idem_key, "resolve")
        if replay is not None:
            return replay
        with self.store.mutate():
            replay = self._idempotent_replay(idem_key, "resolve")
            if replay is not None:
                return replay
            state = self.store.state
            record = state.observations.get(observation_id)
            if record is None:
                raise NoSuchObservation(observation_id)
            if not self.is_expert(user_id):
                raise NotExpert(f"user {user_id!r} is not flagged expert")
            if taxon_id not in self.taxonomy.nodes or taxon_id == ROOT_ID:
                raise UnknownTaxon(taxon_id)

            vote = IdentificationVote(
                vote_id=f"vote-{state.next_vote:08d}",
                observation_id=observation_id,
                user_id=user_id,
                taxon_id=taxon_id,
                timestamp=int(time.time()),
                is_expert=True,
            )
            # Reuse the engine's transition rules against platform state.
            engine = ConsensusEngine(
                self.taxonomy, self.config.share_threshold, self.config.min_votes
            )
            engine.votes[observation_id] = {
                u: IdentificationVote.from_dict(v) for u, v in state.votes[observation_id].items()
            }
            engine.history = {u: tuple(h) for u, h in state.history.items()}
            engine.results[observation_id] = ConsensusResult.from_dict(
                state.results[observation_id]
            )
            result = engine.resolve_dispute(observation_id, vote)
            reliability = [
                [user_id_, *engine.history[user_id_]]
                for user_id_ in sorted(engine.history)
                if engine.history[user_id_] != tuple(state.history.get(user_id_, (0, 0)))
            ]
            event = {
                "type": "expert_resolved",
                "vote": vote.to_dict(),
                "consensus": result.to_dict(),
                "reliability": reliability,
                "vote_seq": state.next_vote,
                "idem_key": idem_key,
                "endpoint": "resolve",
                "response": result.to_dict(),
            }
            self.store.append(event)
            return result.to_dict()

    # -- deferred classification ------------------------------------------------

    def _requeue_pending(self) -> None:
        for obs_id, record in sorted(self.store.state.observations.items()):
            if record.get("classification_pending"):
                self._classify_queue.put(obs_id)

    def _classification_worker(self) -> None:
        while True:
            obs_id = self._classify_queue.get()
            if obs_id is None:
                return
            try:
                self._complete_classification(obs_id)
            except Exception:
                # Left pending; a restart re-enqueues it.
                pass

    def _complete_classification(self, obs_id: str) -> None:
        record = self.store.state.observations[obs_id]
        img = decode_image(self.store.blobs.get(record["image_ref"]))
        probs, result = classifier.classify_image(
            img, self.backend, self.taxonomy, self.config.thresholds
        )
        with self.store.mutate():
            raw_ref = put_json_blob(self.store.blobs, probs)
            accepted, max_prob, ent = screening.insect_presence_gate(
                probs,
                min_max_prob=self.config.screening.min_max_prob,
                max_entropy=self.config.screening.max_entropy(len(probs)),
            )
            status = ScreeningStatus.ACCEPTED if accepted else ScreeningStatus.FLAGGED_NO_INSECT
            verdict = ScreeningVerdict(status, None, max_prob, ent)
            self.store.append(
                {
                    "type": "classification_completed",
                    "observation_id": obs_id,
                    "machine_result": result.to_dict(),
                    "raw_probs_ref": raw_ref,
                    "screening": verdict.to_dict(),
                }
            )
            if not accepted:
                self.index.remove(screening.hex_to_hash(record["phash"]), obs_id)

    def drain_classification_queue(self, timeout: float = 30.0) -> None:
        """Block until no observation is awaiting deferred classification."""
        deadline = time.time() + timeout
        while time.time() < deadline:
            pending = any(
                r.get("classification_pending") for r in self.store.state.observations.values()
            )
            if not pending:
                return
            time.sleep(0.02)
        raise TimeoutError("deferred classifications did not drain in time")

    # -- queries ------------------------------------------------------------

    def _effective_label(self, record: dict, result: dict) -> str | None:
        if result["status"] in (
            ConsensusStatus.CONSENSUS.value,
            ConsensusStatus.EXPERT_RESOLVED.value,
        ):
            return result["label"]
        machine = record.get("machine_result")
        if machine and machine["chosen"] != ROOT_ID:
            return machine["chosen"]
        return None

    def list_observations(
        self,
        status: str | None = None,
        taxon: str | None = None,
        cursor: str | None = None,
        limit: int = DEFAULT_PAGE_SIZE,
    ) -> dict:
        if status is not None and status not in OBSERVATION_STATUSES:
            raise BadFilter(f"unknown status {status!r}")
        if taxon is not None and taxon not in self.taxonomy.nodes:
            raise BadFilter(f"unknown taxon {taxon!r}")
        if not (1 <= limit <= MAX_PAGE_SIZE):
            raise BadFilter(f"limit must be in 1..{MAX_PAGE_SIZE}")
        after = _decode_cursor(cursor) if cursor else ""

        with self.store.mutate():
            ids = sorted(self.store.state.observations)
            state = self.store.state
            selected = []
            for obs_id in ids:
                if obs_id <= after:
                    continue
                record = state.observations[obs_id]
                result = state.results[obs_id]
                if status is not None:
                    if (
                        record["screening"]["status"] != status
                        and result["status"] != status
                    ):
                        continue
                if taxon is not None:
                    label = self._effective_label(record, result)
                    if label is None or not self.taxonomy.is_ancestor_or_self(taxon, label):
                        continue
                selected.append(obs_id)
                if len(selected) > limit:
                    break

        has_more = len(selected) > limit
        page_ids = selected[:limit]
        items = [self.render_observation(i) for i in page_ids]
        return {
            "items": items,
            "next_cursor": _encode_cursor(page_ids[-1]) if has_more else None,
        }

    def list_disputed(self, cursor: str | None = None, limit: int = DEFAULT_PAGE_SIZE) -> dict:
        return self.list_observations(
            status=ConsensusStatus.DISPUTED.value, cursor=cursor, limit=limit
        )

    def _occurrences(self) -> list[LabeledOccurrence]:
        """Consistent snapshot of accepted, finally-labeled observations."""
        include_machine = self.config.include_machine_labels
        occurrences = []
        with self.store.mutate():
            for obs_id in sorted(self.store.state.observations):
                record = self.store.state.observations[obs_id]
                result = self.store.state.results[obs_id]
                if record["screening"]["status"] != ScreeningStatus.ACCEPTED.value:
                    continue
                if result["status"] in (
                    ConsensusStatus.CONSENSUS.value,
                    ConsensusStatus.EXPERT_RESOLVED.value,
                ):
                    label = result["label"]
                elif include_machine:
                    machine = record.get("machine_result")
                    if not machine or machine["chosen"] == ROOT_ID:
                        continue
                    label = machine["chosen"]
                else:
                    continue
                occurrences.append(
                    LabeledOccurrence(
                        observation_id=obs_id,
                        taxon_id=label,
                        latitude=record["latitude"],
                        longitude=record["longitude"],
                        captured_at=record["captured_at"],
                    )
                )
        return occurrences

    def demography_report(self, taxon: str, cell_size: float | None = None) -> list:
        if taxon not in self.taxonomy.nodes:
            raise UnknownTaxon(taxon)
        size = cell_size if cell_size is not None else self.config.cell_size
        return demography.aggregate(self._occurrences(), taxon, size, self.taxonomy)

    def novelty_report(self, cell_size: float | None = None) -> list:
        size = cell_size if cell_size is not None else self.config.cell_size
        return demography.novelty_scan(self._occurrences(), self.taxonomy, size)

    # -- import -----------------------------------------------------------------

    def import_labeled_dataset(self, rows: list[dict], base_dir: str | Path = ".") -> dict:
        """Trusted pre-labeled rows become EXPERT_RESOLVED observations.

        Per-row failures are collected, duplicates are skipped, and every row
        keys an idempotency record so interrupted imports resume cleanly.
        """
        base = Path(base_dir)
        report = {"accepted": 0, "skipped": 0, "failed": 0, "rows": []}
        for i, row in enumerate(rows, start=1):
            canonical = json.dumps(row, sort_keys=True, separators=(",", ":"))
            idem_key = "import-" + hashlib.sha256(canonical.encode()).hexdigest()
            try:
                species = row["species_taxon_id"].strip()
                node = self.taxonomy.nodes.get(species)
                if node is None or node.rank != Rank.SPECIES:
                    raise UnknownTaxon(f"label {species!r} is not a species in the taxonomy")
                image_path = base / row["image_path"]
                image_bytes = image_path.read_bytes()
                record = self.submit_observation(
                    image_bytes,
                    latitude=float(row["lat"]),
                    longitude=float(row["lon"]),
                    captured_at=int(float(row["captured_at"])),
                    user_id=row.get("user_id", "import"),
                    idem_key=idem_key,
                    source="import",
                    skip_gate=True,
                    final_label=species,
                )
            except OSError as exc:
                report["failed"] += 1
                report["rows"].append({"row": i, "outcome": "failed", "error": str(exc)})
                continue
            except Exception as exc:
                report["failed"] += 1
                report["rows"].append(
                    {"row": i, "outcome": "failed", "error": f"{type(exc).__name__}: {exc}"}
                )
                continue
            if record["screening"]["status"] == ScreeningStatus.FLAGGED_DUPLICATE.value:
                report["skipped"] += 1
                report["rows"].append(
                    {
                        "row": i,
                        "outcome": "skipped",
                        "observation_id": record["observation_id"],
                        "matched": record["screening"]["matched_observation_id"],
                    }
                )
            else:
                report["accepted"] += 1
                report["rows"].append(
                    {"row": i, "outcome": "accepted", "observation_id": record["observation_id"]}
                )
        return report

    def close(self) -> None:
        if self._classify_queue is not None:
            self._classify_queue.put(None)
            if self._worker is not None:
                self._worker.join(timeout=5)
        self.store.close()
