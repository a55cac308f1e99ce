from __future__ import annotations

import click

from stackcnn.commands.common import (
    build_pipeline_config,
    echo_json,
    load_optional_model,
    pipeline_options,
    write_json,
)
from stackcnn.services.pipeline import benchmark_window


@click.command("bench")
@pipeline_options
@click.option("--windows", type=int, default=100, show_default=True)
@click.option("--height", type=int, default=60, show_default=True, help="Grid height after downsampling.")
@click.option("--width", type=int, default=80, show_default=True, help="Grid width after downsampling.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def bench(
    ctx: click.Context,
    config_path: str | None,
    classifier: str | None,
    model_path: str | None,
    windows: int,
    height: int,
    width: int,
    seed: int,
    report_path: str | None,
    **overrides,
) -> None:
    """Time evaluation windows (stack over the pool and classify) on noise frames."""
    config = build_pipeline_config(ctx, config_path, classifier, **overrides)
    model = load_optional_model(model_path)
    shape = (height, width) if model is None else tuple(model.architecture.input_shape)
    report = benchmark_window(config, model, windows=windows, shape=shape, seed=seed)
    payload = {"command": "bench", "config": config, "latency": report}
    if report_path:
        write_json(report_path, payload)
    echo_json(payload)
    click.echo(
        f"p99 {report.p99_ms:.2f} ms vs dt {report.dt_ms:.0f} ms: "
        f"{'real-time' if report.realtime_ok else 'NOT real-time'}",
        err=True,
    )
