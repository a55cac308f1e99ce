from __future__ import annotations

from pathlib import Path

import click

from stackcnn.commands.common import echo_json
from stackcnn.schemas.events import EventFormat
from stackcnn.services.event_io import save_events
from stackcnn.services.synth import generate_scene, load_scene_config, save_ground_truth


@click.command("synth")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Event file to write.")
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), default=None,
              help="Ground-truth JSON (default: <out>.truth.json).")
@click.option("--format", "fmt", type=click.Choice([f.value for f in EventFormat]), default=EventFormat.csv.value)
def synth(config_path: str, out_path: str, truth_path: str | None, fmt: str) -> None:
    """Generate a synthetic event stream and its ground truth from a scene YAML."""
    config = load_scene_config(config_path)
    header, events, truth = generate_scene(config)
    out = save_events(out_path, events, header, fmt)
    truth_file = save_ground_truth(truth, truth_path or Path(f"{out_path}.truth.json"))
    echo_json(
        {
            "command": "synth",
            "config": config,
            "events": len(events),
            "outputs": {"events": str(out), "truth": str(truth_file)},
        }
    )
