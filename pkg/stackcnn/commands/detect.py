from __future__ import annotations

from pathlib import Path

import click

from stackcnn.commands.common import (
    build_pipeline_config,
    echo_json,
    load_optional_model,
    pipeline_options,
    read_input,
    write_json,
)
from stackcnn.schemas.pipeline import Detection
from stackcnn.services.dumps import write_pgm
from stackcnn.services.event_io import iter_event_chunks
from stackcnn.services.pipeline import DetectionPipeline


@click.command("detect")
@click.argument("events_path", type=click.Path(dir_okay=False))
@pipeline_options
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Detection report JSON (default: <events>.detections.json).")
@click.option("--dump-dir", type=click.Path(file_okay=False), default=None, help="Write the winning stacks as PGM.")
@click.option("--chunk-size", type=int, default=65_536, show_default=True, help="Events per read chunk.")
@click.pass_context
def detect(
    ctx: click.Context,
    events_path: str,
    config_path: str | None,
    classifier: str | None,
    model_path: str | None,
    report_path: str | None,
    dump_dir: str | None,
    chunk_size: int,
    **overrides,
) -> None:
    """Stream an event file through the detector and report every trigger."""
    config = build_pipeline_config(ctx, config_path, classifier, **overrides)
    model = load_optional_model(model_path)
    header, chunks = iter_event_chunks(read_input(events_path), chunk_size=chunk_size)
    dumps_to = Path(dump_dir) if dump_dir else None
    if dumps_to is not None:
        dumps_to.mkdir(parents=True, exist_ok=True)

    detections: list[Detection] = []
    with DetectionPipeline(config, header.width, header.height, model) as pipeline:

        def keep(detection: Detection) -> None:
            if dumps_to is not None:
                image = next(i for i in pipeline.last_images if i.vector == detection.vector)
                name = f"w{detection.window_index:06d}_x{detection.peak[0]}_y{detection.peak[1]}.pgm"
                write_pgm(image, dumps_to / name)

        pipeline.on_detection = keep
        for chunk in chunks:
            detections.extend(pipeline.feed(chunk))
        detections.extend(pipeline.finish(header.duration))
        summary = pipeline.summary()

    report = {
        "command": "detect",
        "input": events_path,
        "config": {k: v for k, v in summary.config.items() if k != "threads"},
        "frames": summary.frames,
        "windows_evaluated": summary.windows_evaluated,
        "threshold": summary.threshold,
        "matched_filter_threshold": summary.matched_filter_threshold,
        "detections": [d.record() for d in detections],
    }
    out = write_json(report_path or f"{events_path}.detections.json", report)
    echo_json(
        {
            **{k: v for k, v in report.items() if k != "detections"},
            "detections": len(detections),
            "report": str(out),
            "latency": summary.latency,
        }
    )
