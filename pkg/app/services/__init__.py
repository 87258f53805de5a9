# Services module initialization
from app.services.preset_service import PresetService
from app.services.forward_service import ForwardService
from app.services.backward_service import BackwardService
from app.services.analysis_service import AnalysisService
from app.services.estimates_service import EstimatesService
from app.services.experiment_service import ExperimentService

__all__ = [
    "PresetService",
    "ForwardService",
    "BackwardService",
    "AnalysisService",
    "EstimatesService",
    "ExperimentService",
]
