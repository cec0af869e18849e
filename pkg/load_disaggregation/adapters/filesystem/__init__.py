"""Filesystem artifact repository."""

import json
import logging
from pathlib import Path
from typing import Any, Sequence

import pandas as pd
from pydantic import BaseModel

from load_disaggregation.domain.entities import CostModelParams, LossRecord, TrainedAllocator
from load_disaggregation.domain.exceptions import ManifestError
from load_disaggregation.ports.repositories import ArtifactRepository

logger = logging.getLogger(__name__)

ALLOCATOR_VERSION = 1


def _plain(document: Any) -> Any:
    if isinstance(document, BaseModel):
        return document.model_dump(mode="json")
    if isinstance(document, (list, tuple)):
        return [_plain(item) for item in document]
    if isinstance(document, dict):
        return {str(key): _plain(value) for key, value in document.items()}
    return document


def allocator_to_dict(allocator: TrainedAllocator) -> dict[str, Any]:
    params = allocator.params
    return {
        "version": ALLOCATOR_VERSION,
        "seed": params.init_seed,
        "tau": params.temperature,
        "weights": list(params.weights),
        "bias": params.bias,
        "converged": allocator.converged,
        "trained_regions": list(allocator.trained_regions),
        "lambda_ntl": allocator.lambda_ntl,
        "lambda_prox": allocator.lambda_prox,
        "gamma": allocator.gamma,
        "loss_trace": [
            {
                "landuse": r.landuse,
                "ntl_prior": r.ntl_prior,
                "prox_prior": r.prox_prior,
                "total": r.total,
            }
            for r in allocator.loss_trace
        ],
    }


def allocator_from_dict(document: dict[str, Any]) -> TrainedAllocator:
    if document.get("version") != ALLOCATOR_VERSION:
        raise ManifestError(f"Unsupported allocator version {document.get('version')!r}")
    try:
        params = CostModelParams(
            weights=tuple(float(w) for w in document["weights"]),
            bias=float(document.get("bias", 0.0)),
            temperature=float(document["tau"]),
            init_seed=int(document["seed"]),
        )
        trace = tuple(LossRecord(**record) for record in document["loss_trace"])
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"Malformed allocator document: {exc}") from exc
    return TrainedAllocator(
        params=params,
        loss_trace=trace,
        converged=bool(document.get("converged", False)),
        trained_regions=tuple(int(r) for r in document.get("trained_regions", ())),
        lambda_ntl=float(document.get("lambda_ntl", 0.0)),
        lambda_prox=float(document.get("lambda_prox", 0.0)),
        gamma=float(document.get("gamma", 2.0)),
    )


class FilesystemArtifactRepository(ArtifactRepository):
    """Writes every artifact below ``output_dir``."""

    def __init__(self, output_dir: Path) -> None:
        self.output_dir = Path(output_dir)

    def _target(self, name: str) -> Path:
        target = self.output_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_json(self, name: str, document: Any) -> Path:
        target = self._target(name)
        text = json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False)
        target.write_text(text + "\n", encoding="utf-8")
        logger.debug("Wrote %s", target)
        return target

    def read_json(self, name: str) -> Any:
        source = self.output_dir / name
        if not source.exists():
            raise FileNotFoundError(f"{source} not found")
        return json.loads(source.read_text(encoding="utf-8"))

    def write_table(self, name: str, rows: Sequence[Any]) -> Path:
        target = self._target(name)
        pd.DataFrame([_plain(row) for row in rows]).to_csv(target, index=False, lineterminator="\n")
        logger.debug("Wrote %s (%d rows)", target, len(rows))
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self._target(name)
        target.write_text(text, encoding="utf-8")
        return target

    def save_allocator(self, name: str, allocator: TrainedAllocator) -> Path:
        return self.write_json(name, allocator_to_dict(allocator))

    def load_allocator(self, name: str) -> TrainedAllocator:
        return allocator_from_dict(self.read_json(name))
