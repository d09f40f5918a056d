"""HTTP submodel service for the stepsql pipeline."""

from .service import create_app
from .models import TrainingConfig, finetune, load_artifact

__version__ = "0.1.0"

__all__ = ["TrainingConfig", "create_app", "finetune", "load_artifact"]
