"""Unit tests for the radial network and the AC power flow."""

import itertools
import math

import numpy as np
import pytest

from load_disaggregation.domain.entities import Substation
from load_disaggregation.domain.exceptions import (
    FieldValidationError,
    InsufficientSampleError,
    NetworkMismatchError,
)
from load_disaggregation.domain.services.network import (
    SLACK_BUS_ID,
    LineParameters,
    NetworkModel,
    build_mst,
    build_network,
    loading_deviation,
    solve_ac,
)


def _two_bus(length_km: float = 10.0) -> NetworkModel:
    return NetworkModel(
        bus_ids=(SLACK_BUS_ID, 7),
        bus_coords=np.array([[0.0, 0.0], [length_km, 0.0]]),
        edges=((0, 1),),
        lengths_km=np.array([length_km]),
    )


def _tree_length(points: np.ndarray, edges) -> float:
    return sum(float(np.hypot(*(points[i] - points[j]))) for i, j in edges)


def _is_spanning_tree(n: int, edges) -> bool:
    parent = list(range(n))

    def find(k: int) -> int:
        while parent[k] != k:
            k = parent[k]
        return k

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return len(edges) == n - 1


class TestLineParameters:
    """Tests for conductor parameters and per-unit bases."""

    def test_bases(self):
        line = LineParameters()
        assert line.z_base_ohm == pytest.approx(121.0)
        assert line.i_base_ka == pytest.approx(100.0 / (math.sqrt(3) * 110.0))

    @pytest.mark.parametrize("field", ["r_ohm_per_km", "rating_ka", "v_base_kv"])
    def test_non_positive_rejected(self, field):
        with pytest.raises(FieldValidationError):
            LineParameters(**{field: 0.0})


class TestMst:
    """Tests for the minimum spanning tree."""

    @pytest.mark.parametrize("n", [2, 3, 5, 7])
    def test_minimal_against_brute_force(self, n):
        rng = np.random.default_rng(n)
        points = rng.uniform(0, 10, (n, 2))
        edges = build_mst(points)
        assert all(i < j for i, j in edges)
        assert _is_spanning_tree(n, edges)

        pairs = list(itertools.combinations(range(n), 2))
        best = min(
            _tree_length(points, subset)
            for subset in itertools.combinations(pairs, n - 1)
            if _is_spanning_tree(n, subset)
        )
        assert _tree_length(points, edges) == pytest.approx(best)

    def test_single_point(self):
        assert build_mst(np.array([[1.0, 1.0]])) == []

    def test_duplicate_points_rejected(self):
        with pytest.raises(FieldValidationError):
            build_mst(np.array([[0.0, 0.0], [0.0, 0.0]]))

    def test_empty_rejected(self):
        with pytest.raises(InsufficientSampleError):
            build_mst(np.zeros((0, 2)))


class TestBuildNetwork:
    """Tests for network construction."""

    def test_slack_tied_to_nearest_substation(self):
        subs = [
            Substation(id=30, coords=(0.0, 0.0), demand_actual=1.0, region_id=1),
            Substation(id=10, coords=(4.0, 0.0), demand_actual=1.0, region_id=1),
            Substation(id=20, coords=(1.5, 0.0), demand_actual=1.0, region_id=1),
        ]
        network = build_network(subs)
        assert network.bus_ids == (SLACK_BUS_ID, 10, 20, 30)
        assert network.n_lines == network.n_buses - 1
        # centroid (1.83, 0) is closest to substation 20 at bus 2
        assert network.edges[0] == (0, 2)
        np.testing.assert_allclose(network.bus_coords[0], [5.5 / 3, 0.0])
        payload = network.to_dict()
        assert payload["buses"][0]["slack"] is True
        assert len(payload["edges"]) == 3

    def test_zero_length_tie_is_clamped(self):
        subs = [Substation(id=1, coords=(2.0, 2.0), demand_actual=1.0, region_id=1)]
        network = build_network(subs)
        assert network.lengths_km.tolist() == [0.01]


class TestSolveAc:
    """Tests for the Newton-Raphson power flow."""

    def test_two_bus_closed_form(self):
        """Test the receiving-end voltage and current against the analytic solution."""
        network = _two_bus(10.0)
        line = network.line
        p_mw, q_mvar = 20.0, 5.0
        solution = solve_ac(network, [p_mw], [q_mvar])

        r = line.r_ohm_per_km * 10.0 / line.z_base_ohm
        x = line.x_ohm_per_km * 10.0 / line.z_base_ohm
        p, q = p_mw / line.s_base_mva, q_mvar / line.s_base_mva
        v1 = line.slack_voltage_pu
        b = v1**2 - 2 * (p * r + q * x)
        v2 = math.sqrt((b + math.sqrt(b**2 - 4 * (r**2 + x**2) * (p**2 + q**2))) / 2)

        assert solution.converged
        assert solution.voltage_pu[1] == pytest.approx(v2, abs=1e-8)
        current = math.hypot(p, q) / v2 * line.i_base_ka
        assert solution.current_ka[0] == pytest.approx(current, rel=1e-7)
        assert solution.loading_pct[0] == pytest.approx(100 * current / line.rating_ka)

    def test_zero_load_is_flat(self):
        network = _two_bus()
        solution = solve_ac(network, [0.0], [0.0])
        np.testing.assert_allclose(solution.voltage_pu, 1.02)
        np.testing.assert_allclose(solution.current_ka, 0.0, atol=1e-6)
        assert solution.converged

    def test_heavier_load_drops_voltage(self):
        network = _two_bus()
        light = solve_ac(network, [10.0], [3.0])
        heavy = solve_ac(network, [40.0], [13.0])
        assert heavy.voltage_pu[1] < light.voltage_pu[1] < 1.02
        assert heavy.max_loading_pct > light.max_loading_pct

    def test_load_count_checked(self):
        with pytest.raises(FieldValidationError):
            solve_ac(_two_bus(), [1.0, 2.0], [0.0, 0.0])

    def test_line_table(self):
        solution = solve_ac(_two_bus(), [5.0], [1.0])
        table = solution.line_table()
        assert table[0]["from_bus"] == SLACK_BUS_ID
        assert table[0]["to_bus"] == 7
        assert table[0]["length_km"] == 10.0


class TestLoadingDeviation:
    """Tests for line-loading deviation."""

    def test_mean_absolute_gap(self):
        network = _two_bus()
        reference = solve_ac(network, [20.0], [5.0])
        other = solve_ac(network, [10.0], [2.5])
        deviation = loading_deviation(other, reference)
        assert deviation.delta_mae_pp == pytest.approx(
            abs(other.loading_pct[0] - reference.loading_pct[0])
        )
        assert deviation.max_loading_pct == other.max_loading_pct
        assert loading_deviation(reference, reference).delta_mae_pp == 0.0

    def test_different_networks_rejected(self):
        a = solve_ac(_two_bus(10.0), [1.0], [0.0])
        b = solve_ac(_two_bus(12.0), [1.0], [0.0])
        with pytest.raises(NetworkMismatchError):
            loading_deviation(a, b)
