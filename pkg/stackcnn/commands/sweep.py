from __future__ import annotations

import click

from stackcnn.commands.common import (
    build_pipeline_config,
    echo_json,
    load_optional_model,
    pipeline_options,
    write_json,
)
from stackcnn.schemas.evaluation import SweepReport
from stackcnn.services.evaluation import (
    displacement_sweep,
    faintness_sweep,
    injection_recovery,
    resolution_sweep,
    sqrt_n_gain,
)
from stackcnn.services.pipeline import downsampled_shape

RESOLUTION_SENSOR = (90, 120)


@click.command("sweep")
@click.argument("kind", type=click.Choice(["sqrt-n", "faintness", "displacement", "injection", "resolution"]))
@pipeline_options
@click.option("--seeds", type=int, default=None, help="Scenes per point (per-study default when unset).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--value", "values", type=float, multiple=True,
              help="Sweep points: n for sqrt-n, per-frame SNR for faintness, px/frame for displacement, "
                   "full-resolution stacked SNR for resolution.")
@click.option("--factor", "factors", type=int, multiple=True,
              help="Downsampling factors compared by the resolution sweep (default 1 and 3).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="JSON report.")
@click.pass_context
def sweep(
    ctx: click.Context,
    kind: str,
    config_path: str | None,
    classifier: str | None,
    model_path: str | None,
    seeds: int | None,
    seed: int,
    values: tuple[float, ...],
    factors: tuple[int, ...],
    out_path: str | None,
    **overrides,
) -> None:
    """Run one of the seeded Monte-Carlo studies and print its table."""
    if kind in {"displacement", "injection", "resolution"} and classifier is None:
        classifier = "matched-filter"
    config = build_pipeline_config(ctx, config_path, classifier, **overrides)
    model = load_optional_model(model_path)
    shape_kw = {"shape": tuple(model.architecture.input_shape)} if model is not None else {}
    points: list = []
    if kind == "sqrt-n":
        for n in [int(v) for v in values] or [4, 9, 16, 25]:
            r = sqrt_n_gain(n, seeds=seeds or 50, seed=seed)
            points.append(r)
            click.echo(f"n={n:3d} stacked/single={r.ratio:.3f} sqrt(n)={r.expected:.3f}", err=True)
    elif kind == "faintness":
        kwargs = {"per_frame_snrs": values} if values else {}
        for p in faintness_sweep(seeds=seeds or 50, seed=seed, n=config.n, **kwargs):
            points.append(p)
            click.echo(f"snr={p.per_frame_snr:5.2f} single={p.single_frame_rate:.2f} "
                       f"stacked={p.stacked_rate:.2f}", err=True)
    elif kind == "displacement":
        kwargs = {"speeds": values} if values else {}
        for p in displacement_sweep(seeds=seeds or 20, seed=seed, config=config, model=model, **shape_kw, **kwargs):
            points.append(p)
            click.echo(f"speed={p.speed_px_per_frame:5.2f} detection={p.detection_rate:.2f}", err=True)
    elif kind == "resolution":
        factors = factors or (1, 3)
        models = {}
        if model is not None:
            grid = tuple(model.architecture.input_shape)
            models = {f: model for f in factors if downsampled_shape(*RESOLUTION_SENSOR, f) == grid}
        kwargs = {"snrs": values} if values else {}
        for p in resolution_sweep(factors, seeds=seeds or 20, seed=seed, config=config, models=models,
                                  sensor_shape=RESOLUTION_SENSOR, **kwargs):
            points.append(p)
            click.echo(f"snr={p.stacked_snr:5.2f} downsample={p.downsample} grid={p.grid_shape[1]}x{p.grid_shape[0]} "
                       f"detection={p.detection_rate:.2f}", err=True)
    else:
        r = injection_recovery(scenes=seeds or 100, seed=seed, config=config, model=model, **shape_kw)
        points.append(r)
        click.echo(f"detection={r.detection_rate:.3f} velocity recovery={r.velocity_recovery_rate:.3f}", err=True)

    report = SweepReport(kind=kind, config={"pipeline": config.model_dump(mode="json"), "seed": seed},
                         points=[p.model_dump(mode="json") for p in points])
    if out_path:
        write_json(out_path, report)
    echo_json(report)
