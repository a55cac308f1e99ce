from __future__ import annotations

import logging

import click
from pydantic import ValidationError

from stackcnn.commands import bench, convert, detect, geom, sweep, synth, train
from stackcnn.utils.config import settings
from stackcnn.utils.errors import ConfigError, StackCnnError
from stackcnn.utils.logging import configure_logging

logger = logging.getLogger("stackcnn")


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        field = ".".join(str(p) for p in err["loc"]) or exc.title
        parts.append(f"{field}: {err['msg']}")
    return f"invalid {exc.title}: " + "; ".join(parts)


class StackCnnGroup(click.Group):
    """Maps library errors onto the exit codes: 1 config, 2 data, 3 internal."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except StackCnnError as exc:
            click.echo(f"error: {exc.detail}", err=True)
            ctx.exit(exc.exit_code)
        except ValidationError as exc:
            click.echo(f"error: {_validation_message(exc)}", err=True)
            ctx.exit(1)
        except Exception as exc:
            logger.exception("unexpected failure")
            click.echo(f"internal error: {exc}", err=True)
            ctx.exit(3)


@click.group(cls=StackCnnGroup)
@click.option("--log-level", default=None, help="Overrides STACKCNN_LOG_LEVEL.")
@click.option("--threads", type=int, default=None, help="Worker threads per evaluation window.")
@click.version_option("1.0.0", prog_name="stackcnn")
@click.pass_context
def cli(ctx: click.Context, log_level: str | None, threads: int | None) -> None:
    """Event-camera moving-object detection by stacking simil-frames."""
    level = log_level or settings.LOG_LEVEL
    try:
        configure_logging(level)
    except ValueError as exc:
        raise ConfigError(f"unknown log level {level!r}") from exc
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads if threads is not None else settings.THREADS


cli.add_command(synth.synth)
cli.add_command(train.train)
cli.add_command(detect.detect)
cli.add_command(bench.bench)
cli.add_command(geom.geom)
cli.add_command(convert.convert)
cli.add_command(sweep.sweep)


def main() -> None:
    cli(prog_name="stackcnn")


__all__ = ["cli", "main"]
