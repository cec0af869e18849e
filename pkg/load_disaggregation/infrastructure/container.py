"""Dependency injection container."""

from dependency_injector import containers, providers

from load_disaggregation.adapters.csv import CsvScenarioRepository
from load_disaggregation.adapters.filesystem import FilesystemArtifactRepository
from load_disaggregation.application.use_cases.evaluation_service import EvaluationService
from load_disaggregation.application.use_cases.experiment_service import ExperimentService
from load_disaggregation.application.use_cases.powerflow_service import PowerFlowService
from load_disaggregation.application.use_cases.report_service import ReportService
from load_disaggregation.application.use_cases.scenario_service import ScenarioService
from load_disaggregation.application.use_cases.training_service import TrainingService
from load_disaggregation.infrastructure.config.settings import get_settings


class Container(containers.DeclarativeContainer):
    """Application dependency injection container."""

    # Configuration
    config = providers.Singleton(get_settings)

    # Repositories
    scenario_repository = providers.Singleton(CsvScenarioRepository)

    artifact_repository = providers.Factory(
        FilesystemArtifactRepository, output_dir=config.provided.output_dir
    )

    # Application services
    scenario_service = providers.Factory(ScenarioService, scenario_repository=scenario_repository)

    training_service = providers.Factory(TrainingService)

    evaluation_service = providers.Factory(EvaluationService)

    experiment_service = providers.Factory(
        ExperimentService,
        training_service=training_service,
        evaluation_service=evaluation_service,
        workers=config.provided.workers,
    )

    powerflow_service = providers.Factory(PowerFlowService)

    report_service = providers.Factory(ReportService)
