"""
Schema for run configuration documents (JSON).

A document has the sections ``model``, ``train``, ``data`` and an optional
``schedule``. Unknown keys are rejected at every level, and all values are
validated before any compute starts.
"""

from dataclasses import dataclass
import json
from pathlib import Path

from rest_framework import serializers
from rest_framework.settings import api_settings

from ..diffusion import NoiseSchedule
from ..exceptions import ConfigurationError, WSDTError
from ..models import ModelConfig
from ..models.config import HF_MASKS
from ..training import GENERATORS, SynthSpec, TrainConfig
from ..utils.degradation import DEGRADATIONS


class StrictSerializer(serializers.Serializer):
    """Serializer that refuses keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field."] for key in unknown})
        return super().to_internal_value(data)


class ModelConfigSerializer(StrictSerializer):
    """Serializer for the ``model`` section"""

    image_size = serializers.IntegerField(min_value=2)
    scale = serializers.IntegerField(min_value=2)
    channels = serializers.ChoiceField(choices=[1, 3], default=3)
    dim = serializers.IntegerField(min_value=8)
    n_heads = serializers.IntegerField(min_value=1, default=4)
    depth_le = serializers.IntegerField(min_value=1, default=2)
    depth_hd = serializers.IntegerField(min_value=1, default=2)
    mlp_ratio = serializers.FloatField(min_value=0.0, default=4.0)
    p_min = serializers.IntegerField(min_value=1, default=2)
    lr_patch = serializers.IntegerField(min_value=1, default=2)
    timesteps = serializers.IntegerField(min_value=1, default=4)
    pyramid = serializers.BooleanField(default=True)
    lf_residual = serializers.BooleanField(default=True)
    hf_mask = serializers.ChoiceField(choices=list(HF_MASKS), default="high")

    def validate_dim(self, value):
        if value % 8:
            raise serializers.ValidationError("Must be divisible by 8.")
        return value


class ScheduleSerializer(StrictSerializer):
    """Serializer for the optional ``schedule`` section"""

    alpha_bar = serializers.ListField(child=serializers.FloatField(), min_length=1)


class TrainConfigSerializer(StrictSerializer):
    """Serializer for the ``train`` section"""

    iterations = serializers.IntegerField(min_value=0)
    batch_size = serializers.IntegerField(min_value=1, default=4)
    lr_g = serializers.FloatField(min_value=0.0, default=1.6e-4)
    lr_d = serializers.FloatField(min_value=0.0, default=1.25e-4)
    alpha = serializers.FloatField(min_value=0.0, default=1.0)
    beta = serializers.FloatField(min_value=0.0, default=1.0)
    gamma = serializers.FloatField(min_value=0.0, default=1.0)
    seed = serializers.IntegerField(min_value=0, default=0)
    log_every = serializers.IntegerField(min_value=1, default=50)
    checkpoint_every = serializers.IntegerField(min_value=0, default=1000)
    disc_width = serializers.IntegerField(min_value=1, default=64)


class DataSerializer(StrictSerializer):
    """Serializer for the synthetic ``data`` section"""

    count = serializers.IntegerField(min_value=1, default=256)
    seed = serializers.IntegerField(min_value=0, default=0)
    generators = serializers.ListField(
        child=serializers.ChoiceField(choices=list(GENERATORS)),
        min_length=1,
        default=list(GENERATORS),
    )
    degradation = serializers.ChoiceField(choices=list(DEGRADATIONS), default="box")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    schedule: NoiseSchedule
    train: TrainConfig
    data: SynthSpec


class RunConfigSerializer(StrictSerializer):
    """Serializer for a whole run configuration document"""

    model = ModelConfigSerializer()
    schedule = ScheduleSerializer(required=False)
    train = TrainConfigSerializer()
    data = DataSerializer()

    def validate(self, attrs):
        """Build the validated sections, reporting domain errors per section"""
        try:
            model = ModelConfig(**attrs["model"])
        except WSDTError as exc:
            raise serializers.ValidationError({"model": [str(exc)]})

        schedule_attrs = attrs.get("schedule")
        try:
            if schedule_attrs is None:
                schedule = NoiseSchedule.default(model.timesteps)
            else:
                schedule = NoiseSchedule(tuple(schedule_attrs["alpha_bar"]))
        except WSDTError as exc:
            raise serializers.ValidationError({"schedule": {"alpha_bar": [str(exc)]}})
        if schedule.timesteps != model.timesteps:
            raise serializers.ValidationError({
                "schedule": {
                    "alpha_bar": [f"Has {schedule.timesteps} values but model.timesteps is {model.timesteps}."]
                }
            })

        try:
            train = TrainConfig(**attrs["train"])
        except WSDTError as exc:
            raise serializers.ValidationError({"train": [str(exc)]})

        try:
            data = SynthSpec(
                image_size=model.image_size,
                scale=model.scale,
                channels=model.channels,
                **attrs["data"],
            )
        except WSDTError as exc:
            raise serializers.ValidationError({"data": [str(exc)]})
        return RunConfig(model=model, schedule=schedule, train=train, data=data)


def flatten_errors(detail, path=""):
    """
    Turn nested serializer errors into ``dotted.path: message`` strings.
    """
    if isinstance(detail, dict):
        messages = []
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                child = path
            else:
                child = f"{path}.{key}" if path else key
            messages.extend(flatten_errors(value, child))
        return messages
    if isinstance(detail, list):
        messages = []
        for item in detail:
            messages.extend(flatten_errors(item, path))
        return messages
    return [f"{path or 'config'}: {detail}"]


def parse_run_config(document):
    """
    Validate a decoded configuration document.

    Returns:
        RunConfig

    Raises:
        ConfigurationError: listing every problem with its dotted path
    """
    if not isinstance(document, dict):
        raise ConfigurationError("run configuration must be a JSON object")
    serializer = RunConfigSerializer(data=document)
    if not serializer.is_valid():
        problems = "; ".join(flatten_errors(serializer.errors))
        raise ConfigurationError(f"invalid run configuration: {problems}")
    return serializer.validated_data


def load_run_config(path):
    """Read and validate a run configuration file."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_run_config(document)
