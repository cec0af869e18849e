"""Command-line interface using Click."""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click
import yaml
from pydantic import ValidationError

from load_disaggregation.adapters.allocation import FixedFieldBase
from load_disaggregation.application.dto.schemas import (
    CVPlan,
    EvalReport,
    Manifest,
    MethodSpec,
    PowerFlowConfig,
    PowerFlowReport,
    SweepConfig,
    SweepReport,
    SynthConfig,
    TrainConfig,
)
from load_disaggregation.application.use_cases.experiment_service import CVResult
from load_disaggregation.application.use_cases.scenario_service import SyntheticWorld
from load_disaggregation.domain.entities import Scenario
from load_disaggregation.domain.exceptions import DisaggregationError, ManifestError
from load_disaggregation.domain.value_objects import Integration, SweepAxis
from load_disaggregation.infrastructure.container import Container
from load_disaggregation.infrastructure.logging import configure_logging
from load_disaggregation.ports.allocation import LearnedBase

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

F = TypeVar("F", bound=Callable[..., Any])

EXISTING_FILE = click.Path(path_type=Path, dir_okay=False, exists=True)
OUTPUT_DIR = click.Path(path_type=Path, file_okay=False)

manifest_option = click.option(
    "--manifest", "manifest_path", required=True, type=EXISTING_FILE, help="Experiment manifest"
)
out_option = click.option("--out", "output_dir", type=OUTPUT_DIR, help="Output directory")


def exit_code_for(exc: BaseException) -> int:
    """Validation problems exit 1; everything else exits 2."""
    if isinstance(exc, DisaggregationError):
        return EXIT_VALIDATION if exc.is_validation else EXIT_RUNTIME
    if isinstance(exc, (ValidationError, FileNotFoundError, yaml.YAMLError)):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def guarded(func: F) -> F:
    """Report failures on stderr and exit with the stable code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except Exception as exc:
            code = exit_code_for(exc)
            if isinstance(exc, DisaggregationError):
                message = f"{exc.error}: {exc.description}"
            else:
                message = f"{type(exc).__name__}: {exc}"
            if code == EXIT_RUNTIME:
                logger.debug("Unhandled failure", exc_info=exc)
            click.echo(f"Error: {message}", err=True)
            sys.exit(code)

    return wrapper  # type: ignore[return-value]


def _read_yaml(path: Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as handle:
        document = yaml.safe_load(handle)
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ManifestError(f"{path} must contain a mapping")
    return document


def load_manifest(path: Path) -> Manifest:
    """Validate a YAML manifest; a relative scenario path is resolved against it."""
    manifest = Manifest.model_validate(_read_yaml(path))
    if manifest.scenario is not None and not manifest.scenario.is_absolute():
        manifest = manifest.model_copy(update={"scenario": path.parent / manifest.scenario})
    return manifest


def _resolve_world(
    container: Container, manifest: Manifest
) -> tuple[Scenario, Optional[SyntheticWorld]]:
    service = container.scenario_service()
    if manifest.synthetic is not None:
        world = service.generate(manifest.synthetic)
        return world.scenario, world
    assert manifest.scenario is not None
    return service.load_world(manifest.scenario)


def _fixed_base(manifest: Manifest, world: Optional[SyntheticWorld]) -> Optional[LearnedBase]:
    if manifest.learned_base != "informed":
        return None
    if world is None:
        raise ManifestError("learned_base 'informed' needs a synthetic scenario with truth")
    return FixedFieldBase(world.informed_base)


def _output_dir(
    container: Container, override: Optional[Path], manifest: Optional[Manifest]
) -> Path:
    if override is not None:
        return override
    if manifest is not None and manifest.output_dir is not None:
        return manifest.output_dir
    return container.config().output_dir


def _workers(container: Container, override: Optional[int], manifest: Manifest) -> int:
    return override or manifest.workers or container.config().workers


def _prediction_rows(scenario: Scenario, result: CVResult) -> list[dict[str, Any]]:
    rows = []
    ordered = sorted(result.predictions.items(), key=lambda item: (item[0][1], item[0][0]))
    for (method, seed), values in ordered:
        for i, substation_id in enumerate(scenario.substation_ids.tolist()):
            rows.append(
                {
                    "seed": seed,
                    "method": method,
                    "substation_id": substation_id,
                    "region_id": int(scenario.substation_region_ids[i]),
                    "predicted": float(values[i]),
                    "actual": float(scenario.substation_demand[i]),
                }
            )
    return rows


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log at debug level")
@click.pass_context
def app(ctx: click.Context, verbose: bool) -> None:
    """Regional demand disaggregation CLI."""
    container = Container()
    settings = container.config()
    configure_logging("DEBUG" if verbose else settings.log_level, settings.log_format)
    ctx.obj = container


@app.command()
@click.option(
    "--config",
    "config_path",
    type=EXISTING_FILE,
    help="YAML SynthConfig (or a manifest with a 'synthetic' block)",
)
@click.option("--seed", type=int, help="Override the generator seed")
@click.option("--n-regions", type=int, help="Override the number of regions")
@click.option("--out", "output_dir", type=OUTPUT_DIR, help="Scenario directory")
@click.pass_obj
@guarded
def generate(
    container: Container,
    config_path: Optional[Path],
    seed: Optional[int],
    n_regions: Optional[int],
    output_dir: Optional[Path],
) -> None:
    """Generate a synthetic scenario with its ground truth."""
    data = _read_yaml(config_path) if config_path else {}
    data = dict(data.get("synthetic", data))
    if seed is not None:
        data["seed"] = seed
    if n_regions is not None:
        data["n_regions"] = n_regions
    config = SynthConfig.model_validate(data)

    target = output_dir or container.config().output_dir / "scenario"
    service = container.scenario_service()
    world = service.generate(config)
    service.save_world(world, target)
    container.artifact_repository(output_dir=target).write_json("synth_config.json", config)

    click.echo(f"Scenario written to {target}")
    click.echo(f"  Regions: {world.scenario.n_regions}")
    click.echo(f"  Agents: {world.scenario.n_agents}")
    click.echo(f"  Substations: {world.scenario.n_substations}")


@app.command()
@click.option("--manifest", "manifest_path", type=EXISTING_FILE, help="Experiment manifest")
@click.option(
    "--scenario",
    "scenario_dir",
    type=click.Path(path_type=Path, file_okay=False, exists=True),
    help="Scenario directory (without a manifest)",
)
@click.option("--lambda-ntl", type=float, help="Weight of the NTL prior loss")
@click.option("--lambda-prox", type=float, help="Weight of the Proximity prior loss")
@click.option("--seed", type=int, help="Initialization seed")
@out_option
@click.pass_obj
@guarded
def train(
    container: Container,
    manifest_path: Optional[Path],
    scenario_dir: Optional[Path],
    lambda_ntl: Optional[float],
    lambda_prox: Optional[float],
    seed: Optional[int],
    output_dir: Optional[Path],
) -> None:
    """Train the cost model on every region of a scenario."""
    if (manifest_path is None) == (scenario_dir is None):
        raise click.UsageError("Pass exactly one of --manifest and --scenario")
    manifest = load_manifest(manifest_path) if manifest_path else None
    if manifest is not None:
        scenario, _ = _resolve_world(container, manifest)
        config = manifest.train
    else:
        assert scenario_dir is not None
        scenario = container.scenario_service().load(scenario_dir)
        config = TrainConfig()
    updates = {
        key: value
        for key, value in (("lambda_ntl", lambda_ntl), ("lambda_prox", lambda_prox), ("seed", seed))
        if value is not None
    }
    config = TrainConfig.model_validate({**config.model_dump(), **updates})

    allocator = container.training_service().train(scenario, config)
    artifacts = container.artifact_repository(
        output_dir=_output_dir(container, output_dir, manifest)
    )
    path = artifacts.save_allocator("model.json", allocator)
    artifacts.write_table(
        "loss_trace.csv",
        [
            {
                "epoch": epoch,
                "landuse": r.landuse,
                "ntl_prior": r.ntl_prior,
                "prox_prior": r.prox_prior,
                "total": r.total,
            }
            for epoch, r in enumerate(allocator.loss_trace)
        ],
    )

    click.echo(f"Model written to {path}")
    click.echo(f"  Epochs: {len(allocator.loss_trace) - 1}")
    click.echo(f"  Final loss: {allocator.loss_trace[-1].total:.6f}")
    click.echo(f"  Converged: {'yes' if allocator.converged else 'no'}")


@app.command()
@manifest_option
@click.option("--seed", "seeds", type=int, multiple=True, help="CV seed override (repeatable)")
@click.option("--workers", type=click.IntRange(min=1), help="Worker threads for folds")
@out_option
@click.pass_obj
@guarded
def evaluate(
    container: Container,
    manifest_path: Path,
    seeds: tuple[int, ...],
    workers: Optional[int],
    output_dir: Optional[Path],
) -> None:
    """Cross-validate the manifest's methods and write the evaluation report."""
    manifest = load_manifest(manifest_path)
    plan = manifest.plan
    if seeds:
        plan = CVPlan.model_validate({**plan.model_dump(), "seeds": seeds})
    scenario, world = _resolve_world(container, manifest)

    experiments = container.experiment_service(workers=_workers(container, workers, manifest))
    report, result = experiments.evaluate(
        plan,
        scenario,
        manifest.resolved_methods(),
        manifest.train,
        manifest.resolved_comparisons(),
        _fixed_base(manifest, world),
        density_breaks=manifest.density_breaks,
    )

    artifacts = container.artifact_repository(
        output_dir=_output_dir(container, output_dir, manifest)
    )
    artifacts.write_json("eval_report.json", report)
    artifacts.write_table("region_metrics.csv", report.regions)
    artifacts.write_table("seed_metrics.csv", result.seed_rows)
    artifacts.write_table(
        "summary.csv",
        [
            {
                "method": s.method,
                "conserving": s.conserving,
                **{
                    f"{metric}{suffix}": getattr(getattr(s, metric), stat)
                    for metric in ("rmse", "mae", "corr")
                    for suffix, stat in (("", "mean"), ("_std", "std"))
                },
            }
            for s in report.methods
        ],
    )
    artifacts.write_table(
        "comparisons.csv",
        [c.model_dump(exclude={"per_seed_p", "per_seed_p_adjusted"}) for c in report.comparisons],
    )
    artifacts.write_table("predictions.csv", _prediction_rows(scenario, result))
    artifacts.write_json("audit.json", result.audit)
    text = container.report_service().render(report)
    artifacts.write_text("report.txt", text)
    click.echo(text)


@app.command()
@manifest_option
@click.option(
    "--axis",
    type=click.Choice([a.value for a in SweepAxis]),
    help="Run only this axis (default levels unless the manifest lists it)",
)
@out_option
@click.pass_obj
@guarded
def sweep(
    container: Container, manifest_path: Path, axis: Optional[str], output_dir: Optional[Path]
) -> None:
    """Run the manifest's intensity sweeps."""
    manifest = load_manifest(manifest_path)
    sweeps = list(manifest.sweeps)
    if axis is not None:
        chosen = SweepAxis(axis)
        sweeps = [s for s in sweeps if s.axis is chosen] or [SweepConfig(axis=chosen)]
    if not sweeps:
        raise ManifestError("The manifest defines no sweeps")
    scenario, world = _resolve_world(container, manifest)
    fixed_base = _fixed_base(manifest, world)

    experiments = container.experiment_service(workers=_workers(container, None, manifest))
    artifacts = container.artifact_repository(
        output_dir=_output_dir(container, output_dir, manifest)
    )
    tables = container.report_service()
    for config in sweeps:
        report = experiments.run_sweep(config, scenario, manifest.plan, manifest.train, fixed_base)
        artifacts.write_json(f"sweep_{config.axis.value}.json", report)
        artifacts.write_table(f"sweep_{config.axis.value}.csv", report.rows)
        click.echo(f"Sweep over {config.axis.value} ({config.base.value} base)")
        click.echo(tables.sweep_table(report).to_string(index=False))


@app.command()
@manifest_option
@click.option("--region", "region_id", type=int, help="Region to solve (default: the smallest)")
@out_option
@click.pass_obj
@guarded
def powerflow(
    container: Container,
    manifest_path: Path,
    region_id: Optional[int],
    output_dir: Optional[Path],
) -> None:
    """Solve one region's network under metered and predicted loads."""
    manifest = load_manifest(manifest_path)
    config = manifest.powerflow or PowerFlowConfig()
    if region_id is not None:
        config = config.model_copy(update={"region_id": region_id})
    scenario, world = _resolve_world(container, manifest)

    declared = {spec.label: spec for spec in manifest.resolved_methods()}
    specs = [declared.get(label) or MethodSpec.from_label(label) for label in config.methods]
    fixed_base = _fixed_base(manifest, world)
    if fixed_base is not None:
        skipped = [s.label for s in specs if s.integration is Integration.PRIOR_LOSS]
        if skipped:
            logger.warning("Informed base: skipping prior-loss methods %s", skipped)
        specs = [s for s in specs if s.integration is not Integration.PRIOR_LOSS]
    experiments = container.experiment_service(workers=_workers(container, None, manifest))
    result = experiments.run_cv(manifest.plan, scenario, specs, manifest.train, fixed_base)
    first_seed = manifest.plan.seeds[0]
    predictions = {
        method: values
        for (method, seed), values in result.predictions.items()
        if seed == first_seed
    }
    report, solutions = container.powerflow_service().validate(scenario, predictions, config)

    artifacts = container.artifact_repository(
        output_dir=_output_dir(container, output_dir, manifest)
    )
    artifacts.write_json("powerflow.json", report)
    artifacts.write_table("powerflow.csv", report.rows)
    network = next(iter(solutions.values())).network
    artifacts.write_json("network.json", network.to_dict())
    artifacts.write_table(
        "line_loading.csv",
        [
            {"method": method, **line}
            for method, solution in solutions.items()
            for line in solution.line_table()
        ],
    )
    click.echo(container.report_service().powerflow_table(report).to_string(index=False))


@app.command()
@click.option("--out", "output_dir", type=OUTPUT_DIR, help="Directory holding stored reports")
@click.pass_obj
@guarded
def report(container: Container, output_dir: Optional[Path]) -> None:
    """Render the method matrix and mechanism tables from stored reports."""
    artifacts = container.artifact_repository(output_dir=_output_dir(container, output_dir, None))
    evaluation = EvalReport.model_validate(artifacts.read_json("eval_report.json"))
    sweeps = []
    for axis in SweepAxis:
        try:
            document = artifacts.read_json(f"sweep_{axis.value}.json")
        except FileNotFoundError:
            continue
        sweeps.append(SweepReport.model_validate(document))
    try:
        flow: Optional[PowerFlowReport] = PowerFlowReport.model_validate(
            artifacts.read_json("powerflow.json")
        )
    except FileNotFoundError:
        flow = None
    text = container.report_service().render(evaluation, sweeps, flow)
    artifacts.write_text("report.txt", text)
    click.echo(text)


if __name__ == "__main__":
    app()
