"""Option groups and output helpers shared by the subcommands."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable

import click
from pydantic import BaseModel

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import ClassifierKind
from stackcnn.schemas.pipeline import PipelineConfig
from stackcnn.services.model_store import load_model
from stackcnn.utils.config import load_yaml
from stackcnn.utils.errors import ConfigError

CLASSIFIER_CHOICES = {"cnn": ClassifierKind.cnn, "matched-filter": ClassifierKind.matched_filter}


def to_jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True)


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")
    return path


def echo_json(payload: Any) -> None:
    click.echo(dumps(payload))


def pipeline_options(func: Callable) -> Callable:
    """Flags overriding PipelineConfig fields; unset flags fall back to --config, then settings."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="PipelineConfig YAML."),
        click.option("--classifier", type=click.Choice(sorted(CLASSIFIER_CHOICES)), default=None),
        click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None),
        click.option("--dt", type=int, default=None, help="Exposure per simil-frame, microseconds."),
        click.option("--n", "n_frames", type=int, default=None, help="Frames per stack."),
        click.option("--stride", type=int, default=None),
        click.option("--downsample", type=int, default=None),
        click.option("--max-displacement", type=float, default=None, help="Outer pool radius, px/frame."),
        click.option("--threshold", type=float, default=None),
        click.option("--false-alarm", type=float, default=None, help="Per-window target for the matched filter."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_pipeline_config(
    ctx: click.Context,
    config_path: str | None,
    classifier: str | None,
    **overrides: Any,
) -> PipelineConfig:
    base = load_yaml(config_path) if config_path else {}
    renamed = {"n_frames": "n"}
    values = {renamed.get(k, k): v for k, v in overrides.items() if v is not None}
    if classifier is not None:
        values["classifier"] = CLASSIFIER_CHOICES[classifier]
    if "threads" not in base:
        values["threads"] = ctx.obj["threads"]
    return PipelineConfig.model_validate({**base, **values})


def read_input(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def load_optional_model(model_path: str | None) -> CnnModel | None:
    if model_path is None:
        return None
    return load_model(model_path)


__all__ = [
    "CLASSIFIER_CHOICES",
    "pipeline_options",
    "build_pipeline_config",
    "load_optional_model",
    "read_input",
    "echo_json",
    "write_json",
    "dumps",
]
