"""Command-line entry points: the bench harness and the annotation server.

Exit codes: 0 success, 2 partial failures, 3 total failure, 64 bad usage.
"""

import json
import sys

import click
import numpy as np

from .bench import (
    emit_report,
    generate_phantom_cases,
    load_baselines,
    load_config,
    load_manifest,
    render_comparison_table,
    run_experiment,
)
from .errors import MetricUndefinedError
from .metrics import Tolerance, dice, hd95, nsd
from .nifti import load_volume
from .volume import MaskVolume


@click.group()
def bench():
    """Benchmark harness: run experiments, generate phantoms, score masks."""


@bench.command("run")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "md"]), default="json")
@click.option("--workers", type=int, default=None, help="case-level parallelism")
@click.option("--baselines", "baselines_path", type=click.Path(exists=True), default=None)
def bench_run(manifest_path, config_path, out_path, fmt, workers, baselines_path):
    """Run every manifest case under the given configuration."""
    manifest = load_manifest(manifest_path)
    config = load_config(config_path)
    baselines = load_baselines(baselines_path)
    report = run_experiment(manifest, config, workers=workers, baselines=baselines)
    emit_report(report, fmt, out_path)
    for case in report.cases:
        line = f"{case.case_id}: {case.status}"
        if case.metrics is not None:
            line += f" dice={case.metrics.dice:.4f}"
        if case.error:
            line += f" ({case.error})"
        click.echo(line)
    click.echo(f"wrote {out_path}")
    if report.ok_count == len(report.cases):
        return 0
    scored = sum(1 for c in report.cases if c.metrics is not None)
    return 2 if scored > 0 else 3


@bench.command("phantoms")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--count", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def bench_phantoms(out_dir, count, seed):
    """Generate an ellipsoid phantom dataset plus its manifest."""
    if count < 1:
        raise click.UsageError("--count must be >= 1")
    manifest_path = generate_phantom_cases(out_dir, count, seed)
    click.echo(f"wrote {count} phantom case(s); manifest at {manifest_path}")
    return 0


@bench.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--delta", type=float, default=1.0, show_default=True, help="surface tolerance (mm)")
def bench_eval(pred_path, gt_path, delta):
    """One-shot metrics between a predicted and a ground-truth mask file."""
    pred_vol = load_volume(pred_path)
    gt_vol = load_volume(gt_path)
    if pred_vol.dims != gt_vol.dims:
        raise click.ClickException(
            f"shape mismatch: {pred_vol.dims} vs {gt_vol.dims}"
        )
    pred = MaskVolume(dims=pred_vol.dims, labels=(pred_vol.data != 0).astype(np.uint8))
    gt = MaskVolume(dims=gt_vol.dims, labels=(gt_vol.data != 0).astype(np.uint8))
    spacing = gt_vol.spacing
    try:
        hd = hd95(pred, gt, spacing)
    except MetricUndefinedError:
        hd = None
    click.echo(
        json.dumps(
            {
                "dice": dice(pred, gt),
                "nsd": nsd(pred, gt, spacing, Tolerance(delta)),
                "hd95": hd,
                "nsd_delta": delta,
            },
            indent=2,
        )
    )
    return 0


@bench.command("tables")
@click.option("--report", "report_path", type=click.Path(exists=True), default=None)
@click.option("--baselines", "baselines_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def bench_tables(report_path, baselines_path, out_path):
    """Render the published comparison tables (optionally with a run's aggregate)."""
    data = load_baselines(baselines_path)
    parts = []
    if report_path:
        report = json.loads(open(report_path).read())
        agg = report.get("aggregate") or {}
        if agg:
            parts.append(
                "This run: dice {d:.2f}, nsd {n:.2f} (x100, over {k} case(s))\n".format(
                    d=100 * agg["dice"]["mean"],
                    n=100 * agg["nsd"]["mean"],
                    k=agg["n_cases"],
                )
            )
    for name, table in data.get("tables", {}).items():
        parts.append(f"## {table.get('title', name)}\n")
        parts.append(render_comparison_table(table))
    text = "\n".join(parts)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)
    return 0


@click.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(), default=None, help="root for server-side volume paths")
@click.option("--ttl-seconds", type=float, default=7200.0, show_default=True)
@click.option("--save-masks", is_flag=True, help="write final masks under DATA_DIR/masks")
@click.option("--nsd-delta", type=float, default=1.0, show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True), default=None, help="serve a built browser UI at /ui")
def serve(port, host, data_dir, ttl_seconds, save_masks, nsd_delta, ui_dir):
    """Run the interactive annotation service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir=data_dir,
        ttl_seconds=ttl_seconds,
        save_masks=save_masks,
        nsd_delta=nsd_delta,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port)
    return 0


def _dispatch(command, argv=None) -> int:
    try:
        rv = command.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.UsageError as exc:
        exc.show()
        return 64
    except click.ClickException as exc:
        exc.show()
        return 3
    except click.Abort:
        return 130


def bench_main():
    sys.exit(_dispatch(bench))


def serve_main():
    sys.exit(_dispatch(serve))


if __name__ == "__main__":
    bench_main()
