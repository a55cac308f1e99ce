from __future__ import annotations

import click

from stackcnn.commands.common import echo_json, write_json
from stackcnn.schemas.classifier import Architecture, CnnHyperParams
from stackcnn.services.cnn_training import evaluate_accuracy, make_training_set, train_cnn
from stackcnn.services.model_store import save_model
from stackcnn.services.stacking import make_hex_pool
from stackcnn.utils.errors import ConfigError


def _filters(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"--conv-filters must be comma-separated integers, got {value!r}") from exc


@click.command("train")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Model file to write.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None, help="Metrics JSON.")
@click.option("--size", type=int, default=2000, show_default=True, help="Training samples.")
@click.option("--validation", type=int, default=400, show_default=True, help="Held-out samples.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epochs", type=int, default=20, show_default=True)
@click.option("--learning-rate", type=float, default=0.05, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--height", type=int, default=60, show_default=True)
@click.option("--width", type=int, default=80, show_default=True)
@click.option("--n", "n_frames", type=int, default=16, show_default=True, help="Frames per stack.")
@click.option("--max-displacement", type=float, default=1.0, show_default=True)
@click.option("--conv-filters", default="8,16", show_default=True, help="Filters per conv stage; empty for none.")
@click.option("--snr-min", type=float, default=5.0, show_default=True)
@click.option("--snr-max", type=float, default=15.0, show_default=True)
def train(
    out_path: str,
    report_path: str | None,
    size: int,
    validation: int,
    seed: int,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    height: int,
    width: int,
    n_frames: int,
    max_displacement: float,
    conv_filters: str,
    snr_min: float,
    snr_max: float,
) -> None:
    """Train the stack classifier on a seeded synthetic corpus."""
    if size < 2 or validation < 0:
        raise ConfigError("--size must be at least 2 and --validation non-negative")
    if not 0 < snr_min <= snr_max:
        raise ConfigError("--snr-min must be positive and not above --snr-max")
    hyper = CnnHyperParams(epochs=epochs, learning_rate=learning_rate, batch_size=batch_size, seed=seed)
    arch = Architecture(input_shape=(height, width), conv_filters=_filters(conv_filters))
    pool = make_hex_pool(max_displacement)
    corpus = make_training_set(
        size + validation, seed, shape=(height, width), n=n_frames, pool=pool, snr_range=(snr_min, snr_max)
    )
    train_set, held_out = corpus.split(validation / (size + validation))
    model = train_cnn(train_set, hyper, arch, held_out if validation else None)
    model.metadata.dataset = {
        "size": size,
        "validation": validation,
        "seed": seed,
        "shape": [height, width],
        "n": n_frames,
        "max_displacement": max_displacement,
        "snr_range": [snr_min, snr_max],
    }
    save_model(model, out_path)
    report = {
        "command": "train",
        "config": {"hyperparams": hyper, "architecture": arch, "dataset": model.metadata.dataset},
        "initial_loss": model.metadata.initial_loss,
        "loss_curve": model.metadata.loss_curve,
        "train_accuracy": evaluate_accuracy(model, train_set),
        "validation_accuracy": model.metadata.validation_accuracy,
        "model": out_path,
    }
    if report_path:
        write_json(report_path, report)
    echo_json(report)
