"""Rank-ordered taxonomic tree: loading, validation, and lineage queries.

The tree has a fixed four-rank hierarchy (order > family > genus > species)
hanging off a single synthetic root node. Every other module navigates this
structure, so it is validated strictly at load time and immutable afterwards;
reloads swap the whole object under a new version number.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable

from .errors import TaxonomyViolation, UnknownTaxon

ROOT_ID = "ROOT"

CSV_HEADER = ["taxon_id", "parent_id", "rank", "scientific_name", "common_name"]


class Rank(enum.IntEnum):
    """Taxonomic rank, ordered coarse to fine. ROOT is synthetic."""

    ROOT = -1
    ORDER = 0
    FAMILY = 1
    GENUS = 2
    SPECIES = 3

    @classmethod
    def from_name(cls, name: str) -> "Rank":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown rank {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TaxonNode:
    taxon_id: str
    parent_id: str
    rank: Rank
    scientific_name: str
    common_name: str = ""


@dataclass(frozen=True)
class Taxonomy:
    """Validated, immutable taxonomic tree.

    ``nodes`` maps taxon_id to node (root included); ``children`` maps each
    node to its child ids sorted by taxon_id, so iteration order is
    deterministic regardless of input row order.
    """

    nodes: dict[str, TaxonNode]
    children: dict[str, tuple[str, ...]]
    version: int = 1
    _species: frozenset[str] = field(default_factory=frozenset, repr=False)

    @property
    def root(self) -> TaxonNode:
        return self.nodes[ROOT_ID]

    @property
    def species_ids(self) -> frozenset[str]:
        return self._species

    def node(self, taxon_id: str) -> TaxonNode:
        try:
            return self.nodes[taxon_id]
        except KeyError:
            raise UnknownTaxon(f"no taxon {taxon_id!r}") from None

    def ancestor_at_rank(self, taxon_id: str, rank: Rank) -> str | None:
        """Unique ancestor-or-self of ``taxon_id`` at ``rank``.

        Returns None when ``rank`` is finer than the node's own rank.
        """
        node = self.node(taxon_id)
        if rank > node.rank:
            return None
        while node.rank > rank:
            node = self.nodes[node.parent_id]
        return node.taxon_id

    def ancestors_or_self(self, taxon_id: str) -> list[str]:
        """Lineage from the node up to and including the root."""
        node = self.node(taxon_id)
        chain = [node.taxon_id]
        while node.taxon_id != ROOT_ID:
            node = self.nodes[node.parent_id]
            chain.append(node.taxon_id)
        return chain

    def is_ancestor_or_self(self, ancestor_id: str, taxon_id: str) -> bool:
        anc = self.node(ancestor_id)  # raises on unknown id
        node = self.node(taxon_id)
        if anc.rank > node.rank:
            return False
        while node.rank > anc.rank:
            node = self.nodes[node.parent_id]
        return node.taxon_id == anc.taxon_id

    def leaves_under(self, taxon_id: str) -> frozenset[str]:
        """Set of SPECIES descendants-or-self; non-empty by tree invariant."""
        start = self.node(taxon_id)
        if start.rank == Rank.SPECIES:
            return frozenset((start.taxon_id,))
        leaves: set[str] = set()
        stack = [start.taxon_id]
        while stack:
            current = stack.pop()
            kids = self.children.get(current, ())
            if not kids:
                leaves.add(current)
            else:
                stack.extend(kids)
        return frozenset(leaves)

    def descend_order(self) -> Iterable[str]:
        """All taxon ids, root first, parents before children."""
        stack = [ROOT_ID]
        while stack:
            current = stack.pop()
            yield current
            stack.extend(reversed(self.children.get(current, ())))

    def to_rows(self) -> list[dict[str, str]]:
        """Serialize back to taxonomy-table rows (root excluded)."""
        rows = []
        for taxon_id in self.descend_order():
            if taxon_id == ROOT_ID:
                continue
            n = self.nodes[taxon_id]
            rows.append(
                {
                    "taxon_id": n.taxon_id,
                    "parent_id": n.parent_id,
                    "rank": n.rank.label,
                    "scientific_name": n.scientific_name,
                    "common_name": n.common_name,
                }
            )
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.to_rows())
        return buf.getvalue()


def validate_rows(rows: list[dict[str, str]]) -> list[str]:
    """Collect every violation in a taxonomy table; empty list means valid."""
    violations: list[str] = []
    seen: dict[str, int] = {}
    parsed: dict[str, tuple[str, Rank]] = {}

    if not rows:
        return ["EmptyTable: taxonomy table has no rows"]

    for i, row in enumerate(rows, start=1):
        taxon_id = (row.get("taxon_id") or "").strip()
        parent_id = (row.get("parent_id") or "").strip()
        rank_name = (row.get("rank") or "").strip()
        name = (row.get("scientific_name") or "").strip()

        if not taxon_id:
            violations.append(f"row {i}: MissingId: empty taxon_id")
            continue
        if taxon_id == ROOT_ID:
            violations.append(f"row {i}: DuplicateId: taxon_id {ROOT_ID!r} is reserved")
            continue
        if taxon_id in seen:
            violations.append(
                f"row {i}: DuplicateId: {taxon_id!r} already defined at row {seen[taxon_id]}"
            )
            continue
        seen[taxon_id] = i
        try:
            rank = Rank.from_name(rank_name)
        except ValueError:
            violations.append(f"row {i}: BadRank: {rank_name!r}")
            continue
        if rank == Rank.ROOT:
            violations.append(f"row {i}: BadRank: rank 'root' is not allowed in tables")
            continue
        if not name:
            violations.append(f"row {i}: MissingName: empty scientific_name for {taxon_id!r}")
        parsed[taxon_id] = (parent_id, rank)

    # Parent checks need the whole table parsed first.
    for i, row in enumerate(rows, start=1):
        taxon_id = (row.get("taxon_id") or "").strip()
        if taxon_id not in parsed or seen.get(taxon_id) != i:
            continue
        parent_id, rank = parsed[taxon_id]
        if parent_id == ROOT_ID:
            if rank != Rank.ORDER:
                violations.append(
                    f"row {i}: RankSkip: {taxon_id!r} has parent ROOT but rank {rank.label}"
                )
            continue
        if parent_id not in parsed:
            violations.append(f"row {i}: UnknownParent: {taxon_id!r} references {parent_id!r}")
            continue
        parent_rank = parsed[parent_id][1]
        if int(parent_rank) != int(rank) - 1:
            violations.append(
                f"row {i}: RankSkip: {taxon_id!r} ({rank.label}) under {parent_id!r} "
                f"({parent_rank.label})"
            )

    if violations:
        return violations

    # Cycles are impossible once every chain terminates at ROOT with strictly
    # decreasing rank ordinals, but a defensive walk keeps the error explicit.
    for taxon_id in parsed:
        hops = 0
        current = taxon_id
        while current != ROOT_ID:
            current = parsed[current][0]
            hops += 1
            if hops > len(parsed):
                violations.append(f"CycleDetected: lineage of {taxon_id!r} never reaches ROOT")
                break
    if violations:
        return violations

    has_child = {parent for parent, _ in parsed.values()}
    for taxon_id, (_, rank) in sorted(parsed.items()):
        if rank == Rank.SPECIES and taxon_id in has_child:
            violations.append(f"SpeciesWithChildren: {taxon_id!r} is rank species but has children")
        if rank != Rank.SPECIES and taxon_id not in has_child:
            violations.append(f"LeafNotSpecies: {taxon_id!r} is a leaf but rank {rank.label}")
    return violations


def load_taxonomy(rows: list[dict[str, str]], version: int = 1) -> Taxonomy:
    """Build a validated Taxonomy from table rows.

    Raises TaxonomyViolation carrying every violation found; never returns a
    partially-loaded tree.
    """
    violations = validate_rows(rows)
    if violations:
        raise TaxonomyViolation(violations)

    nodes: dict[str, TaxonNode] = {
        ROOT_ID: TaxonNode(ROOT_ID, ROOT_ID, Rank.ROOT, "Insecta", "unidentified insect")
    }
    children: dict[str, list[str]] = {ROOT_ID: []}
    for row in rows:
        node = TaxonNode(
            taxon_id=row["taxon_id"].strip(),
            parent_id=row["parent_id"].strip(),
            rank=Rank.from_name(row["rank"]),
            scientific_name=row["scientific_name"].strip(),
            common_name=(row.get("common_name") or "").strip(),
        )
        nodes[node.taxon_id] = node
        children.setdefault(node.taxon_id, [])
        children.setdefault(node.parent_id, []).append(node.taxon_id)

    frozen = {parent: tuple(sorted(kids)) for parent, kids in children.items()}
    species = frozenset(n.taxon_id for n in nodes.values() if n.rank == Rank.SPECIES)
    return Taxonomy(nodes=nodes, children=frozen, version=version, _species=species)


def parse_taxonomy_csv(text: str) -> list[dict[str, str]]:
    """Parse the taxonomy table wire format (UTF-8 CSV with fixed header)."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_HEADER:
        raise TaxonomyViolation(
            [f"BadHeader: expected {','.join(CSV_HEADER)!r}, got {reader.fieldnames!r}"]
        )
    return list(reader)


def load_taxonomy_csv(text: str, version: int = 1) -> Taxonomy:
    return load_taxonomy(parse_taxonomy_csv(text), version=version)
