from dependency_injector import containers, providers

from fse_forecast.config import settings
from fse_forecast.services.eval_harness import EvaluationService


class Container(containers.DeclarativeContainer):
    # Configuration
    config = providers.Object(settings)

    # Evaluation; the statistical services are built per case from its configuration
    evaluation_service = providers.Factory(
        EvaluationService,
        workers=settings.replicate_workers,
    )


# Create global container instance
container = Container()


def get_evaluation_service() -> EvaluationService:
    return container.evaluation_service()
