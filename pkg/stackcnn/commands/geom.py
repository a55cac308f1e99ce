from __future__ import annotations

import click

from stackcnn.commands.common import echo_json
from stackcnn.schemas.geometry import GeometryParams
from stackcnn.services.geometry import displacement_table, dt_tradeoff, min_detectable_distance

DEFAULT_DISTANCES_KM = (5, 10, 15, 20, 25, 30, 40, 50, 75, 100)
DEFAULT_DTS = (0.02, 0.04, 0.08, 0.16)


@click.command("geom")
@click.option("--fov", type=float, default=40.0, show_default=True, help="Full field of view, degrees.")
@click.option("--matrix", type=int, default=48, show_default=True, help="Pixels per side.")
@click.option("--speed", type=float, default=7500.0, show_default=True, help="Transverse speed, m/s.")
@click.option("--dt", type=float, default=0.08, show_default=True, help="Exposure, seconds.")
@click.option("--max-disp", type=float, default=1.5, show_default=True, help="Largest detectable px/frame.")
@click.option("--n", "n_frames", type=int, default=16, show_default=True)
@click.option("--distance", "distances", type=float, multiple=True, help="Distance in km (repeatable).")
@click.option("--json", "as_json", is_flag=True, help="Print a machine-readable report instead of tables.")
def geom(
    fov: float,
    matrix: int,
    speed: float,
    dt: float,
    max_disp: float,
    n_frames: int,
    distances: tuple[float, ...],
    as_json: bool,
) -> None:
    """Apparent debris speed on the pixel grid versus distance, and the exposure trade-off."""
    params = GeometryParams(fov_angle=fov, matrix_size=matrix, debris_speed=speed, dt=dt)
    rows = displacement_table(params, [km * 1e3 for km in (distances or DEFAULT_DISTANCES_KM)])
    d_min = min_detectable_distance(params, max_disp)
    tradeoff = dt_tradeoff(params, sorted({*DEFAULT_DTS, dt}), max_disp, n_frames)
    if as_json:
        echo_json(
            {
                "command": "geom",
                "config": params,
                "max_disp": max_disp,
                "min_detectable_distance_m": d_min,
                "table": rows,
                "tradeoff": tradeoff,
            }
        )
        return

    click.echo(f"{'distance km':>12} {'m/pixel':>10} {'m/pixel (small angle)':>22} {'px/frame':>9}")
    for row in rows:
        click.echo(
            f"{row.distance_m / 1e3:12.1f} {row.footprint_m:10.1f} {row.small_angle_footprint_m:22.1f} "
            f"{row.px_per_frame:9.3f}"
        )
    click.echo(f"\nminimum distance for <= {max_disp:g} px/frame: {d_min / 1e3:.2f} km\n")
    click.echo(f"{'dt s':>6} {'d_min km':>9} {f'{n_frames}-frame latency s':>20} {'fps':>6} {'px/frame @25km':>15}")
    for t in tradeoff:
        click.echo(
            f"{t.dt_s:6.3f} {t.min_distance_m / 1e3:9.2f} {t.stack_latency_s:20.2f} "
            f"{t.frames_per_second:6.1f} {t.px_per_frame_at_reference:15.3f}"
        )
