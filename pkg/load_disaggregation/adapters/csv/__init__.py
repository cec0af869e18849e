"""CSV scenario repository."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from load_disaggregation.domain.entities import AgentDemandField, Scenario
from load_disaggregation.domain.exceptions import SchemaError
from load_disaggregation.domain.value_objects import LANDUSE_SUFFIXES
from load_disaggregation.ports.repositories import ScenarioRepository

logger = logging.getLogger(__name__)

SHARE_COLUMNS = [f"share_{s}" for s in LANDUSE_SUFFIXES]
LANDUSE_COLUMNS = [f"p_{s}" for s in LANDUSE_SUFFIXES]

REGION_COLUMNS = ["id", "demand_total", *SHARE_COLUMNS, "area"]
AGENT_COLUMNS = ["id", "x_km", "y_km", *LANDUSE_COLUMNS, "ntl", "region_id"]
SUBSTATION_COLUMNS = ["id", "x_km", "y_km", "demand_actual", "region_id"]
TRUTH_COLUMNS = ["agent_id", "true_demand", "informed_base"]

INTEGER_COLUMNS = {"id", "region_id", "agent_id"}
NONNEGATIVE_COLUMNS = {
    "demand_total", "area", "ntl", "demand_actual", "true_demand", "informed_base",
    *SHARE_COLUMNS, *LANDUSE_COLUMNS,
}  # fmt: skip


def _locate(directory: Path, stem: str) -> Path:
    for candidate in (directory / f"{stem}.csv", directory / f"{stem}.csv.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{directory / (stem + '.csv')} not found")


def _read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    """Read a CSV file and check its header and value types row by row."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(path.name, f"unreadable CSV ({exc})") from exc
    for column in columns:
        if column not in frame.columns:
            raise SchemaError(path.name, "missing column", column=column)

    parsed = {}
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna().to_numpy()
        if bad.any():
            row = int(np.argmax(bad)) + 1
            raise SchemaError(path.name, "not a number", row=row, column=column)
        array = values.to_numpy(dtype=float)
        if column in INTEGER_COLUMNS and np.any(array != np.round(array)):
            row = int(np.argmax(array != np.round(array))) + 1
            raise SchemaError(path.name, "expected an integer", row=row, column=column)
        if column in NONNEGATIVE_COLUMNS and np.any(array < 0):
            row = int(np.argmax(array < 0)) + 1
            raise SchemaError(path.name, "negative value", row=row, column=column)
        if not np.all(np.isfinite(array)):
            row = int(np.argmax(~np.isfinite(array))) + 1
            raise SchemaError(path.name, "non-finite value", row=row, column=column)
        parsed[column] = array
    # re-parse floats exactly; to_numeric may round in the last ulp
    exact = pd.read_csv(
        path, usecols=columns, float_precision="round_trip", encoding="utf-8"
    )
    for column in columns:
        if column not in INTEGER_COLUMNS:
            parsed[column] = exact[column].to_numpy(dtype=float)
    return pd.DataFrame(parsed, columns=columns)


class CsvScenarioRepository(ScenarioRepository):
    """Scenario directory of regions.csv, agents.csv and substations.csv."""

    def load(self, path: Path) -> Scenario:
        path = Path(path)
        regions = _read_table(_locate(path, "regions"), REGION_COLUMNS)
        agents = _read_table(_locate(path, "agents"), AGENT_COLUMNS)
        substations = _read_table(_locate(path, "substations"), SUBSTATION_COLUMNS)
        scenario = Scenario.from_arrays(
            region_ids=regions["id"].to_numpy(dtype=np.int64),
            region_demand=regions["demand_total"].to_numpy(),
            region_shares=regions[SHARE_COLUMNS].to_numpy(),
            region_area=regions["area"].to_numpy(),
            agent_ids=agents["id"].to_numpy(dtype=np.int64),
            agent_coords=agents[["x_km", "y_km"]].to_numpy(),
            landuse=agents[LANDUSE_COLUMNS].to_numpy(),
            ntl=agents["ntl"].to_numpy(),
            agent_region_ids=agents["region_id"].to_numpy(dtype=np.int64),
            substation_ids=substations["id"].to_numpy(dtype=np.int64),
            substation_coords=substations[["x_km", "y_km"]].to_numpy(),
            substation_demand=substations["demand_actual"].to_numpy(),
            substation_region_ids=substations["region_id"].to_numpy(dtype=np.int64),
        )
        logger.info(
            "Loaded scenario from %s: %d regions, %d agents, %d substations",
            path,
            scenario.n_regions,
            scenario.n_agents,
            scenario.n_substations,
        )
        return scenario

    def save(self, scenario: Scenario, path: Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        regions = pd.DataFrame({"id": scenario.region_ids, "demand_total": scenario.region_demand})
        for k, column in enumerate(SHARE_COLUMNS):
            regions[column] = scenario.region_shares[:, k]
        regions["area"] = scenario.region_area

        agents = pd.DataFrame(
            {
                "id": scenario.agent_ids,
                "x_km": scenario.agent_coords[:, 0],
                "y_km": scenario.agent_coords[:, 1],
            }
        )
        for k, column in enumerate(LANDUSE_COLUMNS):
            agents[column] = scenario.landuse[:, k]
        agents["ntl"] = scenario.ntl
        agents["region_id"] = scenario.agent_region_ids

        substations = pd.DataFrame(
            {
                "id": scenario.substation_ids,
                "x_km": scenario.substation_coords[:, 0],
                "y_km": scenario.substation_coords[:, 1],
                "demand_actual": scenario.substation_demand,
                "region_id": scenario.substation_region_ids,
            }
        )
        regions.to_csv(path / "regions.csv", index=False, lineterminator="\n")
        agents.to_csv(path / "agents.csv", index=False, lineterminator="\n")
        substations.to_csv(path / "substations.csv", index=False, lineterminator="\n")
        logger.info("Saved scenario to %s", path)

    def save_truth(
        self, path: Path, true_demand: AgentDemandField, informed_base: AgentDemandField
    ) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            {
                "agent_id": true_demand.agent_ids,
                "true_demand": true_demand.demand,
                "informed_base": informed_base.aligned_to(true_demand.agent_ids),
            }
        )
        frame.to_csv(path / "synthetic.csv", index=False, lineterminator="\n")

    def load_truth(self, path: Path) -> Optional[tuple[AgentDemandField, AgentDemandField]]:
        try:
            source = _locate(Path(path), "synthetic")
        except FileNotFoundError:
            return None
        frame = _read_table(source, TRUTH_COLUMNS)
        ids = frame["agent_id"].to_numpy(dtype=np.int64)
        return (
            AgentDemandField(ids, frame["true_demand"].to_numpy(), "truth"),
            AgentDemandField(ids, frame["informed_base"].to_numpy(), "informed"),
        )
