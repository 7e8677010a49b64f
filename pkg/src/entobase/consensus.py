"""Reliability-weighted fusion of human identification votes.

Each vote deposits its user's weight on the voted taxon and all of its
ancestors, so coarse identifications (genus, family) count without forcing a
species guess. The consensus label is the deepest node whose share of the
total deposited weight clears the threshold, found by greedy max-share
descent. Disputes go to an expert whose resolution is terminal and feeds back
into every prior voter's reliability history.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import (
    AlreadyExpertResolved,
    InvalidHistory,
    MissingWeight,
    NoSuchObservation,
    NotExpert,
    NotResolvable,
    UnknownTaxonInVote,
)
from .taxonomy import ROOT_ID, Taxonomy

DEFAULT_SHARE_THRESHOLD = 0.6
DEFAULT_MIN_VOTES = 3

CONSENSUS_CSV_HEADER = ["observation_id", "status", "label", "share", "vote_count"]


def user_reliability(resolved_count: int, correct_count: int) -> float:
    """Laplace-smoothed historical accuracy, strictly inside (0, 1).

    A new user starts at 0.5; no finite history reaches 0 or 1.
    """
    if resolved_count < 0 or correct_count < 0 or correct_count > resolved_count:
        raise InvalidHistory(f"history ({resolved_count}, {correct_count}) is inconsistent")
    return (correct_count + 1) / (resolved_count + 2)


class ConsensusStatus(str, enum.Enum):
    PENDING = "PENDING"
    CONSENSUS = "CONSENSUS"
    DISPUTED = "DISPUTED"
    EXPERT_RESOLVED = "EXPERT_RESOLVED"


@dataclass(frozen=True)
class IdentificationVote:
    vote_id: str
    observation_id: str
    user_id: str
    taxon_id: str
    timestamp: int
    is_expert: bool = False

    def to_dict(self) -> dict:
        return {
            "vote_id": self.vote_id,
            "observation_id": self.observation_id,
            "user_id": self.user_id,
            "taxon_id": self.taxon_id,
            "timestamp": self.timestamp,
            "is_expert": self.is_expert,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IdentificationVote":
        return cls(
            vote_id=d["vote_id"],
            observation_id=d["observation_id"],
            user_id=d["user_id"],
            taxon_id=d["taxon_id"],
            timestamp=int(d["timestamp"]),
            is_expert=bool(d.get("is_expert", False)),
        )


@dataclass(frozen=True)
class ConsensusResult:
    observation_id: str
    status: ConsensusStatus
    label: str | None
    share: float
    total_weight: float
    vote_count: int

    def to_dict(self) -> dict:
        return {
            "observation_id": self.observation_id,
            "status": self.status.value,
            "label": self.label,
            "share": self.share,
            "total_weight": self.total_weight,
            "vote_count": self.vote_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConsensusResult":
        return cls(
            observation_id=d["observation_id"],
            status=ConsensusStatus(d["status"]),
            label=d.get("label"),
            share=float(d["share"]),
            total_weight=float(d["total_weight"]),
            vote_count=int(d["vote_count"]),
        )


def live_votes(votes: Iterable[IdentificationVote]) -> dict[str, IdentificationVote]:
    """One live vote per user: the newest by (timestamp, vote_id)."""
    live: dict[str, IdentificationVote] = {}
    for vote in votes:
        held = live.get(vote.user_id)
        if held is None or (vote.timestamp, vote.vote_id) > (held.timestamp, held.vote_id):
            live[vote.user_id] = vote
    return live


def consensus(
    votes: Iterable[IdentificationVote],
    taxonomy: Taxonomy,
    weights: Mapping[str, float],
    share_threshold: float = DEFAULT_SHARE_THRESHOLD,
    min_votes: int = DEFAULT_MIN_VOTES,
    observation_id: str | None = None,
) -> ConsensusResult:
    """Fuse the live vote set into a consensus result.

    Deposits are accumulated in sorted-user order so the result is invariant
    to vote arrival order, bit for bit.
    """
    live = live_votes(votes)
    obs_id = observation_id
    for vote in live.values():
        if vote.taxon_id not in taxonomy.nodes or vote.taxon_id == ROOT_ID:
            raise UnknownTaxonInVote(f"vote {vote.vote_id} names taxon {vote.taxon_id!r}")
        if vote.user_id not in weights:
            raise MissingWeight(f"no reliability weight for user {vote.user_id!r}")
        if obs_id is None:
            obs_id = vote.observation_id
    obs_id = obs_id or ""

    vote_count = len(live)
    deposited: dict[str, float] = {}
    total_weight = 0.0
    for user_id in sorted(live):
        w = weights[user_id]
        total_weight += w
        for node_id in taxonomy.ancestors_or_self(live[user_id].taxon_id):
            deposited[node_id] = deposited.get(node_id, 0.0) + w

    if vote_count < min_votes:
        return ConsensusResult(
            observation_id=obs_id,
            status=ConsensusStatus.PENDING,
            label=None,
            share=0.0,
            total_weight=total_weight,
            vote_count=vote_count,
        )

    # Greedy max-share descent; only root is guaranteed to qualify.
    current = ROOT_ID
    current_share = 1.0  # deposited(root) == total_weight by construction
    while True:
        kids = taxonomy.children.get(current, ())
        candidates = [k for k in kids if k in deposited]
        if not candidates:
            break
        best = min(candidates, key=lambda k: (-deposited[k], k))
        best_share = deposited[best] / total_weight
        if best_share < share_threshold:
            break
        current = best
        current_share = best_share

    if current == ROOT_ID:
        return ConsensusResult(
            observation_id=obs_id,
            status=ConsensusStatus.DISPUTED,
            label=ROOT_ID,
            share=1.0,
            total_weight=total_weight,
            vote_count=vote_count,
        )
    return ConsensusResult(
        observation_id=obs_id,
        status=ConsensusStatus.CONSENSUS,
        label=current,
        share=current_share,
        total_weight=total_weight,
        vote_count=vote_count,
    )


def reliability_updates(
    prior_votes: Iterable[IdentificationVote], final_label: str, taxonomy: Taxonomy
) -> list[tuple[str, bool]]:
    """Per-user (user_id, was_correct) for an expert resolution.

    A vote counts as correct when it names the final label or any ancestor of
    it; honest coarse identifications earn credit, wrong branches do not.
    """
    updates = []
    for user_id, vote in sorted(live_votes(prior_votes).items()):
        correct = taxonomy.is_ancestor_or_self(vote.taxon_id, final_label)
        updates.append((user_id, correct))
    return updates


def consensus_csv(results: Iterable[ConsensusResult]) -> str:
    """Snapshot export: observation_id,status,label,share,vote_count."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONSENSUS_CSV_HEADER)
    for r in results:
        writer.writerow([r.observation_id, r.status.value, r.label or "", repr(r.share), r.vote_count])
    return buf.getvalue()


class ConsensusEngine:
    """Vote, reliability, and result state for a set of observations.

    Deterministic: any sequence of upserts and resolutions replayed in order
    reproduces identical state. Used both standalone and as the consensus
    half of the platform's replayed store state.
    """

    def __init__(
        self,
        taxonomy: Taxonomy,
        share_threshold: float = DEFAULT_SHARE_THRESHOLD,
        min_votes: int = DEFAULT_MIN_VOTES,
    ):
        self.taxonomy = taxonomy
        self.share_threshold = share_threshold
        self.min_votes = min_votes
        self.votes: dict[str, dict[str, IdentificationVote]] = {}
        self.history: dict[str, tuple[int, int]] = {}
        self.results: dict[str, ConsensusResult] = {}

    def register_observation(self, observation_id: str) -> ConsensusResult:
        result = ConsensusResult(
            observation_id=observation_id,
            status=ConsensusStatus.PENDING,
            label=None,
            share=0.0,
            total_weight=0.0,
            vote_count=0,
        )
        self.votes.setdefault(observation_id, {})
        self.results.setdefault(observation_id, result)
        return self.results[observation_id]

    def weight(self, user_id: str) -> float:
        resolved, correct = self.history.get(user_id, (0, 0))
        return user_reliability(resolved, correct)

    def weights_for(self, observation_id: str) -> dict[str, float]:
        return {user_id: self.weight(user_id) for user_id in self.votes.get(observation_id, {})}

    def result(self, observation_id: str) -> ConsensusResult:
        try:
            return self.results[observation_id]
        except KeyError:
            raise NoSuchObservation(observation_id) from None

    def upsert_vote(self, vote: IdentificationVote) -> ConsensusResult:
        """Replace the user's live vote and recompute; inert after expert resolution."""
        if vote.observation_id not in self.results:
            raise NoSuchObservation(vote.observation_id)
        if vote.taxon_id not in self.taxonomy.nodes or vote.taxon_id == ROOT_ID:
            raise UnknownTaxonInVote(f"vote {vote.vote_id} names taxon {vote.taxon_id!r}")
        self.votes[vote.observation_id][vote.user_id] = vote
        if self.results[vote.observation_id].status == ConsensusStatus.EXPERT_RESOLVED:
            return self.results[vote.observation_id]
        return self.recompute(vote.observation_id)

    def recompute(self, observation_id: str) -> ConsensusResult:
        """Deterministic recomputation from the live vote set; idempotent."""
        if observation_id not in self.results:
            raise NoSuchObservation(observation_id)
        if self.results[observation_id].status == ConsensusStatus.EXPERT_RESOLVED:
            return self.results[observation_id]
        result = consensus(
            self.votes[observation_id].values(),
            self.taxonomy,
            self.weights_for(observation_id),
            share_threshold=self.share_threshold,
            min_votes=self.min_votes,
            observation_id=observation_id,
        )
        self.results[observation_id] = result
        return result

    def resolve_dispute(self, observation_id: str, expert_vote: IdentificationVote) -> ConsensusResult:
        """Terminal expert resolution plus reliability updates for prior voters.

        Allowed from DISPUTED or CONSENSUS (the expert overrides either); the
        expert's own earlier vote, if any, is judged like everyone else's.
        """
        current = self.result(observation_id)
        if not expert_vote.is_expert:
            raise NotExpert(f"user {expert_vote.user_id!r} is not flagged expert")
        if expert_vote.taxon_id not in self.taxonomy.nodes or expert_vote.taxon_id == ROOT_ID:
            raise UnknownTaxonInVote(f"vote {expert_vote.vote_id} names {expert_vote.taxon_id!r}")
        if current.status == ConsensusStatus.EXPERT_RESOLVED:
            raise AlreadyExpertResolved(observation_id)
        if current.status == ConsensusStatus.PENDING:
            raise NotResolvable(f"observation {observation_id} has no quorum yet")

        prior = self.votes[observation_id].values()
        for user_id, correct in reliability_updates(prior, expert_vote.taxon_id, self.taxonomy):
            resolved, right = self.history.get(user_id, (0, 0))
            self.history[user_id] = (resolved + 1, right + (1 if correct else 0))

        self.votes[observation_id][expert_vote.user_id] = expert_vote
        voters = sorted(self.votes[observation_id])
        total_weight = 0.0
        for user_id in voters:
            total_weight += self.weight(user_id)
        result = ConsensusResult(
            observation_id=observation_id,
            status=ConsensusStatus.EXPERT_RESOLVED,
            label=expert_vote.taxon_id,
            share=1.0,
            total_weight=total_weight,
            vote_count=len(voters),
        )
        self.results[observation_id] = result
        return result
