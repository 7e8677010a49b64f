from __future__ import annotations

import random
from datetime import datetime, timezone

import pytest

from entobase.demography import (
    GridCell,
    LabeledOccurrence,
    aggregate,
    demography_csv,
    fluctuation_series,
    grid_cell,
    month_bucket,
    novelty_csv,
    novelty_scan,
)
from entobase.errors import OutOfRangeCoordinates, UnknownTaxon

from .conftest import random_taxonomy
from .oracles import demography_oracle, novelty_oracle

TS_2021_JAN = int(datetime(2021, 1, 15, tzinfo=timezone.utc).timestamp())
TS_2021_FEB = int(datetime(2021, 2, 10, tzinfo=timezone.utc).timestamp())
TS_2021_MAR = int(datetime(2021, 3, 5, tzinfo=timezone.utc).timestamp())


def occ(obs_id, taxon, lat=48.85, lon=2.35, ts=TS_2021_JAN):
    return LabeledOccurrence(obs_id, taxon, lat, lon, ts)


class TestGridCell:
    def test_paris_half_degree(self):
        cell = grid_cell(48.85, 2.35, 0.5)
        assert (cell.lat_idx, cell.lon_idx) == (97, 4)

    def test_origin(self):
        cell = grid_cell(0.0, 0.0, 0.5)
        assert (cell.lat_idx, cell.lon_idx) == (0, 0)

    def test_negative_floor(self):
        cell = grid_cell(-0.3, -0.3, 0.5)
        assert (cell.lat_idx, cell.lon_idx) == (-1, -1)

    def test_lon_180_wraps(self):
        assert grid_cell(10.0, 180.0, 0.5) == grid_cell(10.0, -180.0, 0.5)

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeCoordinates):
            grid_cell(91.0, 0.0, 0.5)
        with pytest.raises(OutOfRangeCoordinates):
            grid_cell(0.0, -180.5, 0.5)
        with pytest.raises(OutOfRangeCoordinates):
            grid_cell(0.0, 0.0, 0.0)

    def test_month_bucket_utc(self):
        assert month_bucket(TS_2021_JAN) == (2021, 1)
        # one second before the UTC month boundary stays in January
        boundary = int(datetime(2021, 2, 1, tzinfo=timezone.utc).timestamp())
        assert month_bucket(boundary - 1) == (2021, 1)
        assert month_bucket(boundary) == (2021, 2)


class TestAggregate:
    def test_three_same_cell_month(self, tiny_taxonomy):
        rows = aggregate([occ("a", "s1"), occ("b", "s1"), occ("c", "s1")], "s1", 0.5, tiny_taxonomy)
        assert len(rows) == 1
        assert rows[0].count == 3
        assert rows[0].total_in_cell_bucket == 3
        assert rows[0].relative_frequency == 1.0

    def test_genus_filter_includes_descendants(self, tiny_taxonomy):
        rows = aggregate(
            [occ("a", "s1"), occ("b", "s1"), occ("c", "s2")], "g1", 0.5, tiny_taxonomy
        )
        assert rows[0].count == 3

    def test_relative_frequency(self, tiny_taxonomy):
        occurrences = [occ(f"x{i}", "s1") for i in range(2)]
        occurrences += [occ(f"y{i}", "s3") for i in range(6)]
        rows = aggregate(occurrences, "s1", 0.5, tiny_taxonomy)
        assert rows[0].count == 2
        assert rows[0].total_in_cell_bucket == 8
        assert rows[0].relative_frequency == 0.25

    def test_zero_count_cells_omitted(self, tiny_taxonomy):
        rows = aggregate([occ("a", "s3")], "s1", 0.5, tiny_taxonomy)
        assert rows == []

    def test_unknown_taxon(self, tiny_taxonomy):
        with pytest.raises(UnknownTaxon):
            aggregate([], "zz", 0.5, tiny_taxonomy)

    def test_permutation_invariance(self, tiny_taxonomy):
        rng = random.Random(71)
        occurrences = [
            occ(f"o{i}", rng.choice(["s1", "s2", "s3"]), 48.0 + rng.random() * 3,
                2.0 + rng.random() * 3, rng.choice([TS_2021_JAN, TS_2021_FEB]))
            for i in range(60)
        ]
        base = aggregate(occurrences, "g1", 0.5, tiny_taxonomy)
        for _ in range(5):
            shuffled = occurrences[:]
            rng.shuffle(shuffled)
            assert aggregate(shuffled, "g1", 0.5, tiny_taxonomy) == base

    def test_genus_count_is_sum_of_children(self, tiny_taxonomy):
        rng = random.Random(72)
        occurrences = [
            occ(f"o{i}", rng.choice(["s1", "s2", "s3"]), 48.0 + rng.random(),
                2.0 + rng.random(), rng.choice([TS_2021_JAN, TS_2021_FEB]))
            for i in range(80)
        ]
        genus_rows = {
            (r.cell, r.year, r.month): r.count
            for r in aggregate(occurrences, "g1", 0.5, tiny_taxonomy)
        }
        child_sums: dict = {}
        for child in ("s1", "s2"):
            for r in aggregate(occurrences, child, 0.5, tiny_taxonomy):
                key = (r.cell, r.year, r.month)
                child_sums[key] = child_sums.get(key, 0) + r.count
        assert genus_rows == child_sums

    def test_matches_recount_oracle(self, tiny_taxonomy):
        rng = random.Random(73)
        occurrences = [
            occ(f"o{i}", rng.choice(["s1", "s2", "s3"]),
                rng.uniform(-5, 5), rng.uniform(-5, 5),
                rng.choice([TS_2021_JAN, TS_2021_FEB, TS_2021_MAR]))
            for i in range(200)
        ]
        rows = aggregate(occurrences, "g1", 0.5, tiny_taxonomy)
        expected = demography_oracle(occurrences, "g1", 0.5, tiny_taxonomy)
        got = {
            ((r.cell.lat_idx, r.cell.lon_idx), r.year, r.month): (r.count, r.total_in_cell_bucket)
            for r in rows
        }
        assert got == expected
        for r in rows:
            assert 0.0 < r.relative_frequency <= 1.0


class TestFluctuation:
    def test_single_month(self, tiny_taxonomy):
        rows = aggregate([occ("a", "s1")], "s1", 0.5, tiny_taxonomy)
        series = fluctuation_series(rows, "s1", rows[0].cell)
        assert series == [(2021, 1, 1, 1.0)]

    def test_gap_month_filled_with_null(self, tiny_taxonomy):
        rows = aggregate(
            [occ("a", "s1", ts=TS_2021_JAN), occ("b", "s1", ts=TS_2021_MAR)],
            "s1", 0.5, tiny_taxonomy,
        )
        series = fluctuation_series(rows, "s1", rows[0].cell)
        assert series[0][:3] == (2021, 1, 1)
        assert series[1] == (2021, 2, 0, None)
        assert series[2][:3] == (2021, 3, 1)

    def test_series_sums_match_aggregate(self, tiny_taxonomy):
        rng = random.Random(74)
        occurrences = [
            occ(f"o{i}", "s1", 48.2, 2.2, rng.choice([TS_2021_JAN, TS_2021_FEB, TS_2021_MAR]))
            for i in range(30)
        ]
        rows = aggregate(occurrences, "s1", 0.5, tiny_taxonomy)
        series = fluctuation_series(rows, "s1", rows[0].cell)
        assert sum(count for _, _, count, _ in series) == sum(r.count for r in rows)

    def test_year_rollover(self, tiny_taxonomy):
        dec = int(datetime(2020, 12, 25, tzinfo=timezone.utc).timestamp())
        rows = aggregate(
            [occ("a", "s1", ts=dec), occ("b", "s1", ts=TS_2021_FEB)], "s1", 0.5, tiny_taxonomy
        )
        series = fluctuation_series(rows, "s1", rows[0].cell)
        assert [s[:2] for s in series] == [(2020, 12), (2021, 1), (2021, 2)]


class TestNovelty:
    def test_single_observation_single_event(self, tiny_taxonomy):
        events = novelty_scan([occ("a", "s1")], tiny_taxonomy, 0.5)
        assert len(events) == 1
        assert events[0].observation_id == "a"

    def test_second_sighting_no_event(self, tiny_taxonomy):
        events = novelty_scan(
            [occ("a", "s1", ts=TS_2021_JAN), occ("b", "s1", ts=TS_2021_FEB)],
            tiny_taxonomy, 0.5,
        )
        assert len(events) == 1
        assert events[0].first_timestamp == TS_2021_JAN

    def test_coarse_labels_produce_no_events(self, tiny_taxonomy):
        assert novelty_scan([occ("a", "g1")], tiny_taxonomy, 0.5) == []

    def test_timestamp_tie_smaller_observation_id(self, tiny_taxonomy):
        events = novelty_scan(
            [occ("b", "s1", ts=TS_2021_JAN), occ("a", "s1", ts=TS_2021_JAN)],
            tiny_taxonomy, 0.5,
        )
        assert events[0].observation_id == "a"

    def test_fuzz_matches_first_occurrence_oracle(self):
        rng = random.Random(75)
        t = random_taxonomy(rng, max_species=10)
        species = sorted(t.species_ids)
        occurrences = [
            occ(f"o{i:03d}", rng.choice(species), rng.uniform(-3, 3), rng.uniform(-3, 3),
                TS_2021_JAN + rng.randint(0, 5_000_000))
            for i in range(200)
        ]
        events = novelty_scan(occurrences, t, 0.5)
        expected = novelty_oracle(occurrences, t, 0.5)
        got = {
            (e.taxon_id, (e.cell.lat_idx, e.cell.lon_idx)): (e.first_timestamp, e.observation_id)
            for e in events
        }
        assert got == expected
        # idempotent and sorted by timestamp
        assert novelty_scan(occurrences, t, 0.5) == events
        stamps = [e.first_timestamp for e in events]
        assert stamps == sorted(stamps)


class TestCsv:
    def test_demography_csv_header_and_rows(self, tiny_taxonomy):
        rows = aggregate([occ("a", "s1")], "s1", 0.5, tiny_taxonomy)
        text = demography_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "taxon_id,lat_idx,lon_idx,cell_size,year,month,count,total,relative_frequency"
        assert lines[1] == "s1,97,4,0.5,2021,1,1,1,1.0"

    def test_novelty_csv(self, tiny_taxonomy):
        events = novelty_scan([occ("a", "s1")], tiny_taxonomy, 0.5)
        lines = novelty_csv(events).strip().split("\n")
        assert lines[0] == "taxon_id,lat_idx,lon_idx,first_timestamp,observation_id"
        assert lines[1] == f"s1,97,4,{TS_2021_JAN},a"

    def test_empty_exports_are_header_only(self):
        assert demography_csv([]).strip().split("\n") == [
            "taxon_id,lat_idx,lon_idx,cell_size,year,month,count,total,relative_frequency"
        ]
        assert novelty_csv([]).strip().split("\n") == [
            "taxon_id,lat_idx,lon_idx,first_timestamp,observation_id"
        ]
