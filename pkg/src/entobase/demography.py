"""Occurrence aggregation over an equal-angle grid and calendar months.

Counts are raw labeled occurrences; relative frequency (a taxon's share of all
accepted observations in the same cell and month) is the effort-normalized
index reported alongside them. Crowdsourced data carries strong observer bias,
so neither number estimates absolute population.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .errors import OutOfRangeCoordinates
from .taxonomy import Taxonomy

DEFAULT_CELL_SIZE_DEG = 0.5

DEMOGRAPHY_CSV_HEADER = [
    "taxon_id",
    "lat_idx",
    "lon_idx",
    "cell_size",
    "year",
    "month",
    "count",
    "total",
    "relative_frequency",
]
NOVELTY_CSV_HEADER = ["taxon_id", "lat_idx", "lon_idx", "first_timestamp", "observation_id"]


@dataclass(frozen=True, order=True)
class GridCell:
    lat_idx: int
    lon_idx: int
    cell_size_deg: float


def grid_cell(lat: float, lon: float, cell_size_deg: float = DEFAULT_CELL_SIZE_DEG) -> GridCell:
    """Floor-division grid indices; longitude 180 wraps to -180 before flooring."""
    if cell_size_deg <= 0:
        raise OutOfRangeCoordinates(f"cell size must be positive, got {cell_size_deg}")
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise OutOfRangeCoordinates(f"({lat}, {lon}) outside valid ranges")
    if lon == 180.0:
        lon = -180.0
    return GridCell(
        lat_idx=math.floor(lat / cell_size_deg),
        lon_idx=math.floor(lon / cell_size_deg),
        cell_size_deg=cell_size_deg,
    )


def month_bucket(timestamp: int) -> tuple[int, int]:
    """UTC (year, month) for an epoch-seconds timestamp."""
    dt = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    return dt.year, dt.month


@dataclass(frozen=True)
class LabeledOccurrence:
    """An accepted observation with a final (consensus or expert) label."""

    observation_id: str
    taxon_id: str
    latitude: float
    longitude: float
    captured_at: int


@dataclass(frozen=True)
class DemographyCell:
    taxon_id: str
    cell: GridCell
    year: int
    month: int
    count: int
    total_in_cell_bucket: int

    @property
    def relative_frequency(self) -> float:
        return self.count / self.total_in_cell_bucket


@dataclass(frozen=True)
class NoveltyEvent:
    taxon_id: str
    cell: GridCell
    first_timestamp: int
    observation_id: str


def aggregate(
    occurrences: Iterable[LabeledOccurrence],
    taxon_filter: str,
    cell_size_deg: float,
    taxonomy: Taxonomy,
) -> list[DemographyCell]:
    """Per-(cell, month) counts of the filter taxon or its descendants.

    Totals cover every labeled occurrence in the same cell and month
    regardless of taxon; zero-count cells are omitted.
    """
    taxonomy.node(taxon_filter)  # raises UnknownTaxon
    counts: dict[tuple[GridCell, int, int], int] = {}
    totals: dict[tuple[GridCell, int, int], int] = {}
    for occ in occurrences:
        cell = grid_cell(occ.latitude, occ.longitude, cell_size_deg)
        year, month = month_bucket(occ.captured_at)
        key = (cell, year, month)
        totals[key] = totals.get(key, 0) + 1
        if taxonomy.is_ancestor_or_self(taxon_filter, occ.taxon_id):
            counts[key] = counts.get(key, 0) + 1

    rows = [
        DemographyCell(
            taxon_id=taxon_filter,
            cell=cell,
            year=year,
            month=month,
            count=count,
            total_in_cell_bucket=totals[(cell, year, month)],
        )
        for (cell, year, month), count in counts.items()
    ]
    rows.sort(key=lambda r: (r.cell, r.year, r.month))
    return rows


def _next_month(year: int, month: int) -> tuple[int, int]:
    return (year + 1, 1) if month == 12 else (year, month + 1)


def fluctuation_series(
    cells: Sequence[DemographyCell], taxon_id: str, cell: GridCell
) -> list[tuple[int, int, int, float | None]]:
    """(year, month, count, relative_frequency) ascending, gaps filled with (0, None)."""
    rows = {
        (r.year, r.month): r for r in cells if r.taxon_id == taxon_id and r.cell == cell
    }
    if not rows:
        return []
    series: list[tuple[int, int, int, float | None]] = []
    current = min(rows)
    last = max(rows)
    while current <= last:
        row = rows.get(current)
        if row is None:
            series.append((current[0], current[1], 0, None))
        else:
            series.append((current[0], current[1], row.count, row.relative_frequency))
        current = _next_month(*current)
    return series


def novelty_scan(
    occurrences: Iterable[LabeledOccurrence],
    taxonomy: Taxonomy,
    cell_size_deg: float,
) -> list[NoveltyEvent]:
    """First occurrence of each species per grid cell, sorted by timestamp.

    Only species-rank labels produce events; coarser labels leave the species
    unknown. Timestamp ties go to the smaller observation_id.
    """
    species = taxonomy.species_ids
    firsts: dict[tuple[str, GridCell], tuple[int, str]] = {}
    for occ in occurrences:
        if occ.taxon_id not in species:
            continue
        cell = grid_cell(occ.latitude, occ.longitude, cell_size_deg)
        key = (occ.taxon_id, cell)
        candidate = (occ.captured_at, occ.observation_id)
        if key not in firsts or candidate < firsts[key]:
            firsts[key] = candidate

    events = [
        NoveltyEvent(taxon_id=taxon_id, cell=cell, first_timestamp=ts, observation_id=obs_id)
        for (taxon_id, cell), (ts, obs_id) in firsts.items()
    ]
    events.sort(key=lambda e: (e.first_timestamp, e.taxon_id, e.cell, e.observation_id))
    return events


def demography_csv(rows: Iterable[DemographyCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DEMOGRAPHY_CSV_HEADER)
    for r in rows:
        writer.writerow(
            [
                r.taxon_id,
                r.cell.lat_idx,
                r.cell.lon_idx,
                repr(r.cell.cell_size_deg),
                r.year,
                r.month,
                r.count,
                r.total_in_cell_bucket,
                repr(r.relative_frequency),
            ]
        )
    return buf.getvalue()


def novelty_csv(events: Iterable[NoveltyEvent]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(NOVELTY_CSV_HEADER)
    for e in events:
        writer.writerow([e.taxon_id, e.cell.lat_idx, e.cell.lon_idx, e.first_timestamp, e.observation_id])
    return buf.getvalue()
