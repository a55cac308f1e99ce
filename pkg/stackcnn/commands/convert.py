from __future__ import annotations

from pathlib import Path

import click

from stackcnn.commands.common import read_input
from stackcnn.schemas.events import EventFormat
from stackcnn.services.event_io import read_events, write_events


@click.command("convert")
@click.argument("src", type=click.Path(dir_okay=False))
@click.argument("dst", type=click.Path(dir_okay=False))
@click.option("--to", "fmt", type=click.Choice([f.value for f in EventFormat]), required=True)
def convert(src: str, dst: str, fmt: str) -> None:
    """Rewrite an event file in the other format; the input format is sniffed."""
    data = read_input(src)
    if not data:
        Path(dst).write_bytes(b"")
        click.echo(f"{src}: empty input, wrote empty {dst}")
        return
    header, events = read_events(data)
    Path(dst).write_bytes(write_events(events, header, fmt))
    click.echo(f"{src} -> {dst}: {len(events)} events as {fmt}")
