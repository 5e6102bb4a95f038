# Import the serializers to make them available from wsdt.serializers
from .config import (
    DataSerializer,
    ModelConfigSerializer,
    RunConfig,
    RunConfigSerializer,
    ScheduleSerializer,
    StrictSerializer,
    TrainConfigSerializer,
    flatten_errors,
    load_run_config,
    parse_run_config,
)

__all__ = [
    "DataSerializer",
    "ModelConfigSerializer",
    "RunConfig",
    "RunConfigSerializer",
    "ScheduleSerializer",
    "StrictSerializer",
    "TrainConfigSerializer",
    "flatten_errors",
    "load_run_config",
    "parse_run_config",
]
