"""Simplified radial 110 kV network and Newton-Raphson AC power flow.

Bus 0 is the slack bus at the substation centroid; buses 1..n are the
substations in ascending id order. Lines are the minimum spanning tree over
the substations plus one tie from the slack bus to its nearest substation.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from load_disaggregation.domain.entities import Substation
from load_disaggregation.domain.exceptions import (
    FieldValidationError,
    InsufficientSampleError,
    NetworkMismatchError,
)

logger = logging.getLogger(__name__)

SLACK_BUS_ID = -1
MISMATCH_TOL = 1e-8
MAX_ITERATIONS = 50


@dataclass(frozen=True)
class LineParameters:
    """Per-km parameters of the overhead conductor and the per-unit system."""

    r_ohm_per_km: float = 0.194
    x_ohm_per_km: float = 0.41
    c_nf_per_km: float = 8.75
    rating_ka: float = 0.47
    frequency_hz: float = 50.0
    v_base_kv: float = 110.0
    s_base_mva: float = 100.0
    slack_voltage_pu: float = 1.02
    min_length_km: float = 0.01
    include_shunt: bool = False

    def __post_init__(self) -> None:
        positive = (
            "r_ohm_per_km", "x_ohm_per_km", "rating_ka", "frequency_hz",
            "v_base_kv", "s_base_mva", "slack_voltage_pu", "min_length_km",
        )  # fmt: skip
        for name in positive:
            if not getattr(self, name) > 0:
                raise FieldValidationError(f"{name} must be > 0")
        if self.c_nf_per_km < 0:
            raise FieldValidationError("c_nf_per_km must be >= 0")

    @property
    def z_base_ohm(self) -> float:
        return self.v_base_kv**2 / self.s_base_mva

    @property
    def i_base_ka(self) -> float:
        return self.s_base_mva / (math.sqrt(3.0) * self.v_base_kv)


def build_mst(points: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal minimum spanning tree over planar points.

    Edges are (i, j) with i < j, considered in order of (length, i, j).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FieldValidationError("Points must be an (n, 2) array")
    n = len(pts)
    if n == 0:
        raise InsufficientSampleError("Spanning tree needs at least one point")
    if len(np.unique(pts, axis=0)) != n:
        raise FieldValidationError("Spanning tree points must be distinct")

    i, j = np.triu_indices(n, k=1)
    lengths = np.hypot(*(pts[i] - pts[j]).T)
    order = np.lexsort((j, i, lengths))

    components = DisjointSet(range(n))
    edges: list[tuple[int, int]] = []
    for k in order.tolist():
        a, b = int(i[k]), int(j[k])
        if components.merge(a, b):
            edges.append((a, b))
            if len(edges) == n - 1:
                break
    return edges


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Radial network; line k connects ``edges[k]`` (bus indices)."""

    bus_ids: tuple[int, ...]
    bus_coords: np.ndarray
    edges: tuple[tuple[int, int], ...]
    lengths_km: np.ndarray
    line: LineParameters = field(default_factory=LineParameters)

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)

    @property
    def n_lines(self) -> int:
        return len(self.edges)

    @property
    def load_bus_ids(self) -> tuple[int, ...]:
        return self.bus_ids[1:]

    def series_admittance_pu(self) -> np.ndarray:
        z = (self.line.r_ohm_per_km + 1j * self.line.x_ohm_per_km) * self.lengths_km
        return self.line.z_base_ohm / z

    def shunt_susceptance_pu(self) -> np.ndarray:
        """Total line-charging susceptance of each line (zero unless shunts are enabled)."""
        if not self.line.include_shunt:
            return np.zeros(self.n_lines)
        omega = 2.0 * math.pi * self.line.frequency_hz
        return omega * self.line.c_nf_per_km * 1e-9 * self.lengths_km * self.line.z_base_ohm

    def admittance_matrix(self) -> np.ndarray:
        y = self.series_admittance_pu()
        half_b = 0.5j * self.shunt_susceptance_pu()
        ybus = np.zeros((self.n_buses, self.n_buses), dtype=complex)
        for k, (f, t) in enumerate(self.edges):
            ybus[f, f] += y[k] + half_b[k]
            ybus[t, t] += y[k] + half_b[k]
            ybus[f, t] -= y[k]
            ybus[t, f] -= y[k]
        return ybus

    def same_topology(self, other: "NetworkModel") -> bool:
        return (
            self.bus_ids == other.bus_ids
            and self.edges == other.edges
            and np.allclose(self.lengths_km, other.lengths_km)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "buses": [
                {"id": bus_id, "x": float(x), "y": float(y), "slack": bus_id == SLACK_BUS_ID}
                for bus_id, (x, y) in zip(self.bus_ids, self.bus_coords.tolist())
            ],
            "edges": [
                {
                    "from": self.bus_ids[f],
                    "to": self.bus_ids[t],
                    "length_km": float(length),
                }
                for (f, t), length in zip(self.edges, self.lengths_km.tolist())
            ],
            "line_parameters": asdict(self.line),
        }


def build_network(
    substations: Sequence[Substation], line_params: LineParameters | None = None
) -> NetworkModel:
    """MST over substations plus a centroid slack bus tied to its nearest substation.

    Ties in the slack distance go to the lowest substation id.
    """
    if not substations:
        raise InsufficientSampleError("Network needs at least one substation")
    line = line_params or LineParameters()
    ordered = sorted(substations, key=lambda s: s.id)
    coords = np.array([s.coords for s in ordered], dtype=float)
    centroid = coords.mean(axis=0)

    mst = [(a + 1, b + 1) for a, b in build_mst(coords)]
    nearest = int(np.argmin(np.hypot(*(coords - centroid).T)))
    edges = tuple([(0, nearest + 1), *mst])

    bus_coords = np.vstack([centroid, coords])
    lengths = np.array(
        [np.hypot(*(bus_coords[f] - bus_coords[t])) for f, t in edges], dtype=float
    )
    lengths = np.maximum(lengths, line.min_length_km)
    logger.debug("Built network with %d buses and %d lines", len(ordered) + 1, len(edges))
    return NetworkModel(
        bus_ids=(SLACK_BUS_ID, *(s.id for s in ordered)),
        bus_coords=bus_coords,
        edges=edges,
        lengths_km=lengths,
        line=line,
    )


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    """Bus voltages and per-line currents and loadings of one solve."""

    network: NetworkModel
    voltage_pu: np.ndarray
    angle_rad: np.ndarray
    current_ka: np.ndarray
    loading_pct: np.ndarray
    converged: bool
    max_mismatch_pu: float
    iterations: int

    @property
    def max_loading_pct(self) -> float:
        return float(self.loading_pct.max()) if self.loading_pct.size else 0.0

    def line_table(self) -> list[dict[str, Any]]:
        ids = self.network.bus_ids
        return [
            {
                "from_bus": ids[f],
                "to_bus": ids[t],
                "length_km": float(self.network.lengths_km[k]),
                "current_ka": float(self.current_ka[k]),
                "loading_pct": float(self.loading_pct[k]),
            }
            for k, (f, t) in enumerate(self.network.edges)
        ]


def _power_injections(ybus: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v * np.conj(ybus @ v)


def _jacobian(ybus: np.ndarray, v: np.ndarray, pq: np.ndarray) -> np.ndarray:
    current = ybus @ v
    diag_v = np.diag(v)
    diag_vnorm = np.diag(v / np.abs(v))
    ds_dvm = diag_v @ np.conj(ybus @ diag_vnorm) + np.conj(np.diag(current)) @ diag_vnorm
    ds_dva = 1j * diag_v @ np.conj(np.diag(current) - ybus @ diag_v)
    block = np.ix_(pq, pq)
    return np.block(
        [
            [ds_dva[block].real, ds_dvm[block].real],
            [ds_dva[block].imag, ds_dvm[block].imag],
        ]
    )


def solve_ac(
    network: NetworkModel,
    p_mw: Sequence[float],
    q_mvar: Sequence[float],
    tol: float = MISMATCH_TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> PowerFlowSolution:
    """Newton-Raphson in polar coordinates from a flat start.

    ``p_mw`` and ``q_mvar`` are consumed loads aligned with ``network.load_bus_ids``.
    """
    p = np.asarray(p_mw, dtype=float)
    q = np.asarray(q_mvar, dtype=float)
    n_loads = network.n_buses - 1
    if p.shape != (n_loads,) or q.shape != (n_loads,):
        raise FieldValidationError(f"Expected {n_loads} load values per quantity")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise FieldValidationError("Loads must be finite")

    line = network.line
    s_spec = np.concatenate([[0.0], -(p + 1j * q) / line.s_base_mva])
    ybus = network.admittance_matrix()
    pq = np.arange(1, network.n_buses)

    vm = np.ones(network.n_buses)
    va = np.zeros(network.n_buses)
    vm[0] = line.slack_voltage_pu
    v = vm * np.exp(1j * va)

    converged = False
    mismatch = np.inf
    iteration = 0
    while True:
        residual = _power_injections(ybus, v)[pq] - s_spec[pq]
        f = np.concatenate([residual.real, residual.imag])
        mismatch = float(np.max(np.abs(f))) if f.size else 0.0
        if mismatch <= tol:
            converged = True
            break
        if iteration >= max_iterations or not np.isfinite(mismatch):
            break
        try:
            dx = np.linalg.solve(_jacobian(ybus, v, pq), -f)
        except np.linalg.LinAlgError:
            break
        va[pq] += dx[: len(pq)]
        vm[pq] += dx[len(pq) :]
        v = vm * np.exp(1j * va)
        iteration += 1

    if not converged:
        logger.warning(
            "Power flow did not converge after %d iterations (mismatch %.3g p.u.)",
            iteration,
            mismatch,
        )

    y = network.series_admittance_pu()
    half_b = 0.5j * network.shunt_susceptance_pu()
    frm = np.array([e[0] for e in network.edges], dtype=np.int64)
    to = np.array([e[1] for e in network.edges], dtype=np.int64)
    i_from = (v[frm] - v[to]) * y + v[frm] * half_b
    i_to = (v[to] - v[frm]) * y + v[to] * half_b
    current_ka = np.maximum(np.abs(i_from), np.abs(i_to)) * line.i_base_ka
    return PowerFlowSolution(
        network=network,
        voltage_pu=np.abs(v),
        angle_rad=np.angle(v),
        current_ka=current_ka,
        loading_pct=100.0 * current_ka / line.rating_ka,
        converged=converged,
        max_mismatch_pu=mismatch,
        iterations=iteration,
    )


@dataclass(frozen=True)
class LoadingDeviation:
    """Line-loading error of a solution against a reference solve."""

    delta_mae_pp: float
    max_loading_pct: float


def loading_deviation(
    solution: PowerFlowSolution, reference_solution: PowerFlowSolution
) -> LoadingDeviation:
    if not solution.network.same_topology(reference_solution.network):
        raise NetworkMismatchError("Solutions were computed on different networks")
    delta = np.abs(solution.loading_pct - reference_solution.loading_pct)
    return LoadingDeviation(
        delta_mae_pp=float(delta.mean()) if delta.size else 0.0,
        max_loading_pct=solution.max_loading_pct,
    )
