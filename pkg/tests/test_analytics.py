import json
import math

import numpy as np
import pytest

from modfleet.analytics import (
    CriticalDensityConfig,
    DEFAULT_CRITICAL_DENSITY,
    compute_density,
    congested_edges,
    congestion_diff,
    density_histogram,
    export_heatmap,
    save_densities,
    save_share_table,
    share_table,
    stacked_histogram,
)
from modfleet.errors import UnknownEdge, WindowMismatch
from modfleet.simulation import EdgeOccupancyLog, SimulationResult, TripType, TYPE_ORDER

from oracles import build_network

D, P, O, R = TripType.DEMAND, TripType.PICKUP, TripType.DROPOFF, TripType.REBALANCING
W = 600.0


@pytest.fixture
def net4():
    """Four 100 m single-lane edges on a line (plus reverses)."""
    coords = {i: (50.0, 14.0 + 0.002 * i) for i in range(5)}
    specs = []
    eid = 0
    for i in range(4):
        specs.append((eid, i, i + 1, 100.0)); eid += 1
        specs.append((eid, i + 1, i, 100.0)); eid += 1
    return build_network(coords, specs, speed_mps=10.0)


def log_with(cells):
    """cells: {(edge, window, type): density}; builds an occupancy log that
    produces exactly those densities on 100 m single-lane edges. Densities
    above one vehicle-per-window stack several concurrent traversals."""
    log = EdgeOccupancyLog(W)
    for (edge, window, ttype), density in cells.items():
        veh_s = density * W * 100.0 * 1
        start = window * W
        while veh_s > 0:
            chunk = min(W, veh_s)
            log.record(edge, start, start + chunk, ttype)
            veh_s -= chunk
    return log


def result_with(log, distances, fleet_size=0):
    return SimulationResult(
        log=log,
        distance_by_type={t: distances.get(t, 0.0) for t in TYPE_ORDER},
        served=0, unsatisfied=0, per_station_min_inventory={},
        fleet_size=fleet_size, phantoms_created=0, rebalancing_shortfall=0,
        served_trips=(),
    )


class TestComputeDensity:
    def test_zero_occupancy(self, net4):
        table = compute_density(EdgeOccupancyLog(W), net4)
        assert table.rows == {}
        assert table.total(0, 0) == 0.0

    def test_full_window_single_vehicle(self, net4):
        log = EdgeOccupancyLog(W)
        log.record(0, 0.0, 600.0, D)
        table = compute_density(log, net4)
        assert table.total(0, 0) == pytest.approx(0.01, abs=1e-15)

    def test_lanes_divide_density(self):
        net = build_network({0: (50.0, 14.0), 1: (50.0, 14.002)},
                            [(0, 0, 1, 100.0, 4)], speed_mps=10.0)
        log = EdgeOccupancyLog(W)
        log.record(0, 0.0, 600.0, D)
        table = compute_density(log, net)
        assert table.total(0, 0) == pytest.approx(0.0025, abs=1e-15)

    def test_unknown_edge(self, net4):
        log = EdgeOccupancyLog(W)
        log.record(999, 0.0, 10.0, D)
        with pytest.raises(UnknownEdge):
            compute_density(log, net4)

    def test_default_critical_density(self):
        assert DEFAULT_CRITICAL_DENSITY == 0.08
        assert CriticalDensityConfig().y_c == 0.08

    def test_additivity(self, net4):
        log = EdgeOccupancyLog(W)
        log.record(0, 0.0, 300.0, D)
        log.record(0, 100.0, 400.0, P)
        log.record(0, 200.0, 500.0, R)
        table = compute_density(log, net4)
        row = table.rows[(0, 0)]
        assert abs(table.total(0, 0) - row.sum()) < 1e-12

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CriticalDensityConfig(y_c=-1.0)
        with pytest.raises(ValueError):
            CriticalDensityConfig(low_cut=0.6, focus=0.5)


class TestCongestedEdges:
    def test_empty(self, net4):
        table = compute_density(EdgeOccupancyLog(W), net4)
        assert congested_edges(table, CriticalDensityConfig()) == set()

    def test_threshold_crossing(self, net4):
        table = compute_density(log_with({(0, 0, D): 0.081, (2, 0, D): 0.079}), net4)
        assert congested_edges(table, CriticalDensityConfig()) == {(0, 0)}

    def test_exactly_at_threshold_is_congested(self, net4):
        log = EdgeOccupancyLog(W)
        # 0.08 * 600 * 100 = 4800 vehicle-seconds exactly: 8 full-window cars
        for _ in range(8):
            log.record(0, 0.0, 600.0, D)
        table = compute_density(log, net4)
        assert table.total(0, 0) == 0.08
        assert (0, 0) in congested_edges(table, CriticalDensityConfig())

    def test_scope_restricts_types(self, net4):
        table = compute_density(log_with({(0, 0, D): 0.05, (0, 0, P): 0.05}), net4)
        cfg = CriticalDensityConfig()
        assert congested_edges(table, cfg) == {(0, 0)}
        assert congested_edges(table, cfg, scope=(D,)) == set()

    def test_matches_linear_scan(self, net4):
        rng = np.random.default_rng(2)
        cells = {}
        for edge in range(8):
            for window in range(4):
                cells[(edge, window, D)] = float(rng.uniform(0, 0.16))
        table = compute_density(log_with(cells), net4)
        cfg = CriticalDensityConfig()
        expected = {(e, w) for (e, w, _), d in cells.items()
                    if table.total(e, w) >= cfg.y_c}
        assert congested_edges(table, cfg) == expected


class TestCongestionDiff:
    def test_identical_tables_empty_diff(self, net4):
        log = log_with({(0, 0, D): 0.09})
        t1 = compute_density(log, net4)
        t2 = compute_density(log, net4)
        assert congestion_diff(t1, t2, CriticalDensityConfig()).newly_congested == frozenset()

    def test_pickup_pushes_over_threshold(self, net4):
        base = compute_density(log_with({(0, 0, D): 0.05}), net4)
        mod = compute_density(log_with({(0, 0, D): 0.05, (0, 0, P): 0.04}), net4)
        diff = congestion_diff(base, mod, CriticalDensityConfig())
        assert diff.newly_congested == frozenset({(0, 0)})

    def test_already_congested_not_in_diff(self, net4):
        base = compute_density(log_with({(0, 0, D): 0.09}), net4)
        mod = compute_density(log_with({(0, 0, D): 0.09, (0, 0, P): 0.04}), net4)
        diff = congestion_diff(base, mod, CriticalDensityConfig())
        assert diff.newly_congested == frozenset()

    def test_diff_subset_of_mod_congestion(self, net4):
        rng = np.random.default_rng(4)
        base_cells = {(e, 0, D): float(rng.uniform(0, 0.1)) for e in range(8)}
        mod_cells = dict(base_cells)
        for e in range(8):
            mod_cells[(e, 0, P)] = float(rng.uniform(0, 0.05))
        base = compute_density(log_with(base_cells), net4)
        mod = compute_density(log_with(mod_cells), net4)
        cfg = CriticalDensityConfig()
        diff = congestion_diff(base, mod, cfg)
        assert diff.newly_congested <= congested_edges(mod, cfg)

    def test_window_mismatch(self, net4):
        log1 = EdgeOccupancyLog(600.0)
        log2 = EdgeOccupancyLog(300.0)
        with pytest.raises(WindowMismatch):
            congestion_diff(compute_density(log1, net4), compute_density(log2, net4),
                            CriticalDensityConfig())


class TestShareTable:
    def test_conventional_all_demand(self, net4):
        log = log_with({(0, 0, D): 0.09, (2, 0, D): 0.05})
        table = compute_density(log, net4)
        shares = share_table(result_with(log, {D: 5000.0}), table, CriticalDensityConfig())
        assert shares.rows[D].distance_share == 1.0
        assert shares.rows[D].congestion_share == 1.0
        assert shares.rows[P].distance_share == 0.0
        assert shares.rows[D].avg_km_per_vehicle_per_day is None

    def test_two_edge_synthetic_fractions(self, net4):
        # edge 0 is in the congestion population (total 0.06 > 0.04),
        # edge 2 stays below it and must not contribute
        cells = {(0, 0, D): 0.045, (0, 0, R): 0.015, (2, 0, D): 0.03}
        log = log_with(cells)
        table = compute_density(log, net4)
        shares = share_table(result_with(log, {D: 3000.0, R: 1000.0}), table,
                             CriticalDensityConfig())
        d0 = table.rows[(0, 0)]
        expected_d = d0[0] / d0.sum()
        expected_r = d0[3] / d0.sum()
        assert shares.rows[D].congestion_share == pytest.approx(expected_d, rel=1e-12)
        assert shares.rows[R].congestion_share == pytest.approx(expected_r, rel=1e-12)
        assert shares.rows[D].distance_share == 0.75
        assert shares.rows[R].distance_share == 0.25
        assert shares.congestion_population == 1

    def test_columns_sum_to_one(self, net4):
        rng = np.random.default_rng(8)
        cells = {}
        for e in range(8):
            for t in (D, P, O, R):
                cells[(e, 0, t)] = float(rng.uniform(0.01, 0.08))
        log = log_with(cells)
        table = compute_density(log, net4)
        distances = {D: 100.0, P: 30.0, O: 20.0, R: 50.0}
        shares = share_table(result_with(log, distances), table, CriticalDensityConfig())
        assert sum(r.distance_share for r in shares.rows.values()) == pytest.approx(1.0, abs=1e-6)
        assert sum(r.congestion_share for r in shares.rows.values()) == pytest.approx(1.0, abs=1e-6)

    def test_per_vehicle_column(self, net4):
        log = log_with({(0, 0, D): 0.05})
        table = compute_density(log, net4)
        shares = share_table(result_with(log, {D: 159_000.0}, fleet_size=2), table,
                             CriticalDensityConfig(), fleet_size=2, horizon_days=1.0)
        assert shares.rows[D].avg_km_per_vehicle_per_day == pytest.approx(79.5)

    def test_population_threshold_is_strict(self, net4):
        # exactly focus * y_c (0.04) must NOT enter the population
        log = EdgeOccupancyLog(W)
        for _ in range(4):
            log.record(0, 0.0, 600.0, D)  # total density exactly 0.04
        table = compute_density(log, net4)
        assert table.total(0, 0) == 0.04
        shares = share_table(result_with(log, {D: 100.0}), table, CriticalDensityConfig())
        assert shares.congestion_population == 0


class TestHistograms:
    def test_all_below_low_cut(self, net4):
        table = compute_density(log_with({(0, 0, D): 0.0001}), net4)
        hist = density_histogram(table, CriticalDensityConfig(), bins=10)
        assert hist.counts.sum() == 0
        assert hist.excluded_fraction == 1.0

    def test_cap_absorbs_in_last_bin(self, net4):
        cells = {(0, 0, D): 0.04, (2, 0, D): 0.09, (4, 0, D): 0.20}
        table = compute_density(log_with(cells), net4)
        hist = density_histogram(table, CriticalDensityConfig(), bins=4)
        # bins span [0.0008, 0.16); 0.20 > 0.16 lands in the last bin
        assert hist.counts[-1] == 1
        assert hist.counts.sum() == 3

    def test_exclusion_threshold_value(self):
        cfg = CriticalDensityConfig()
        assert cfg.low_cut * cfg.y_c == pytest.approx(0.0008)

    def test_conservation(self, net4):
        rng = np.random.default_rng(10)
        cells = {(e, w, D): float(rng.uniform(0, 0.2))
                 for e in range(8) for w in range(3)}
        table = compute_density(log_with(cells), net4)
        hist = density_histogram(table, CriticalDensityConfig(), bins=12)
        assert hist.counts.sum() == hist.population
        assert hist.population + hist.excluded == table.universe
        assert table.universe == 8 * 3

    def test_focus_only_restricts_population(self, net4):
        cells = {(0, 0, D): 0.02, (2, 0, D): 0.06}
        table = compute_density(log_with(cells), net4)
        cfg = CriticalDensityConfig()
        plain = density_histogram(table, cfg, bins=8)
        focused = density_histogram(table, cfg, bins=8, focus_only=True)
        assert plain.population == 2
        assert focused.population == 1
        assert focused.bin_edges[0] == pytest.approx(cfg.focus * cfg.y_c)

    def test_stacked_degenerates_for_single_type(self, net4):
        cells = {(e, 0, D): 0.02 + 0.01 * e for e in range(4)}
        table = compute_density(log_with(cells), net4)
        cfg = CriticalDensityConfig()
        plain = density_histogram(table, cfg, bins=6)
        stacked = stacked_histogram(table, cfg, bins=6)
        assert np.array_equal(plain.counts, stacked.counts)
        assert np.allclose(stacked.stacks[:, 0], stacked.counts)
        assert np.allclose(stacked.stacks[:, 1:], 0.0)

    def test_stack_proportions(self, net4):
        table = compute_density(log_with({(0, 0, D): 0.06, (0, 0, R): 0.02}), net4)
        stacked = stacked_histogram(table, CriticalDensityConfig(), bins=4)
        row = table.rows[(0, 0)]
        idx = int(np.flatnonzero(stacked.counts)[0])
        assert stacked.stacks[idx, 0] == pytest.approx(row[0] / row.sum(), rel=1e-12)
        assert stacked.stacks[idx, 3] == pytest.approx(row[3] / row.sum(), rel=1e-12)

    def test_stack_totals_equal_plain_counts(self, net4):
        rng = np.random.default_rng(21)
        cells = {}
        for e in range(8):
            for w in range(2):
                for t in (D, P, O, R):
                    cells[(e, w, t)] = float(rng.uniform(0, 0.05))
        table = compute_density(log_with(cells), net4)
        cfg = CriticalDensityConfig()
        plain = density_histogram(table, cfg, bins=9)
        stacked = stacked_histogram(table, cfg, bins=9)
        assert np.allclose(stacked.stacks.sum(axis=1), plain.counts, atol=1e-9)


class TestMonotonicity:
    def test_added_occupancy_never_decreases_density(self, net4):
        log = log_with({(0, 0, D): 0.05, (2, 0, D): 0.03})
        before = compute_density(log, net4)
        d_before = before.total(0, 0)
        congested_before = congested_edges(before, CriticalDensityConfig())
        log.record(0, 0.0, 600.0, P)
        after = compute_density(log, net4)
        assert after.total(0, 0) >= d_before
        assert congested_before <= congested_edges(after, CriticalDensityConfig())


class TestExportsAndIO:
    def test_heatmap_empty(self, net4, tmp_path):
        table = compute_density(EdgeOccupancyLog(W), net4)
        collection = export_heatmap(table, net4, tmp_path / "h.geojson")
        assert collection["features"] == []
        assert json.loads((tmp_path / "h.geojson").read_text())["type"] == "FeatureCollection"

    def test_heatmap_single_edge(self, net4, tmp_path):
        table = compute_density(log_with({(0, 0, D): 0.07}), net4)
        collection = export_heatmap(table, net4, tmp_path / "h.geojson")
        assert len(collection["features"]) == 1
        feature = collection["features"][0]
        assert feature["properties"]["edge_id"] == 0
        assert feature["properties"]["density"] == pytest.approx(0.07, rel=1e-12)
        assert len(feature["geometry"]["coordinates"]) == 2

    def test_heatmap_mean_over_windows(self, net4, tmp_path):
        table = compute_density(log_with({(0, 0, D): 0.06, (0, 1, D): 0.02}), net4)
        collection = export_heatmap(table, net4, tmp_path / "h.geojson")
        assert collection["features"][0]["properties"]["density"] == pytest.approx(0.04, rel=1e-12)

    def test_heatmap_scope_and_restrict(self, net4, tmp_path):
        table = compute_density(log_with({(0, 0, D): 0.06, (0, 1, P): 0.02}), net4)
        peak = table.restrict(0, 1)
        collection = export_heatmap(peak, net4, tmp_path / "h.geojson", scope=(D,))
        assert collection["features"][0]["properties"]["density"] == pytest.approx(0.06, rel=1e-12)

    def test_save_densities_csv(self, net4, tmp_path):
        table = compute_density(log_with({(0, 0, D): 0.05, (0, 0, P): 0.01}), net4)
        path = tmp_path / "densities.csv"
        save_densities(table, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "edge_id,window_index,trip_type,density"
        assert len(lines) == 3

    def test_save_share_table_json(self, net4, tmp_path):
        log = log_with({(0, 0, D): 0.05})
        table = compute_density(log, net4)
        shares = share_table(result_with(log, {D: 100.0}), table, CriticalDensityConfig())
        path = tmp_path / "share_table.json"
        save_share_table(shares, path)
        doc = json.loads(path.read_text())
        assert doc["types"]["demand"]["distance_share"] == 1.0
