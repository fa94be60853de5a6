"""Command-line surface: reproducible evaluation workflows.

Every run echoes its resolved configuration to stderr before computing.
Exit codes: 0 success, 2 usage error, 3 data error, 4 solver failure.
Worker threads affect wall time only; report files are byte-identical for
any ``--threads`` value.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from . import __version__
from .cloud import fps_sample, random_sample
from .distances import (DEFAULT_DCD_ALPHA, DEFAULT_EMD_EPSILON, DistanceSpec,
                        aligned_distance, resolve_emd_solver)
from .errors import PcevalError, SolverFailureError
from .io_formats import (load_cloud, load_set, save_cloud, save_normals,
                         write_report, write_sweep)
from .metrics import DEFAULT_JSD_RESOLUTION, evaluate_sets
from .neighbors import NeighborhoodSpec
from .normals import estimate_normals
from .perturb import PerturbSpec, SweepConfig, perturb_cloud, run_sweep

log = logging.getLogger("pceval")

EXIT_DATA_ERROR = 3
EXIT_SOLVER_FAILURE = 4


def _echo_config(name: str, config: dict) -> None:
    click.echo(f"pceval {__version__} :: {name} :: "
               + json.dumps(config, sort_keys=True, default=str), err=True)


def _threads(value: int) -> int:
    return value if value > 0 else (os.cpu_count() or 1)


def _fail(exc: PcevalError):
    code = EXIT_SOLVER_FAILURE if isinstance(exc, SolverFailureError) else EXIT_DATA_ERROR
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Root seed for randomized subcommands.")
@click.option("--threads", type=int, default=0, show_default=True,
              help="Worker threads (0 = all cores). Values never depend on it.")
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
@click.pass_context
def main(ctx, seed, threads, log_level):
    """Point-cloud set evaluation: distances, metrics, normals, sweeps."""
    logging.basicConfig(level=getattr(logging, log_level.upper()))
    ctx.obj = {"seed": seed, "threads": _threads(threads)}


def _make_specs(measures, aligned, alpha, epsilon, emd_solver, normalize):
    return tuple(
        DistanceSpec(measure=m, aligned=aligned, alpha=alpha,
                     solver=emd_solver, epsilon=epsilon, normalize=normalize)
        for m in measures
    )


@main.command("distance")
@click.argument("cloud_a", type=click.Path(exists=True))
@click.argument("cloud_b", type=click.Path(exists=True))
@click.option("--measure", default="dcd", show_default=True,
              type=click.Choice(["cd", "emd", "dcd"]))
@click.option("--aligned/--no-aligned", default=True, show_default=True)
@click.option("--alpha", type=float, default=DEFAULT_DCD_ALPHA, show_default=True)
@click.option("--epsilon", type=float, default=DEFAULT_EMD_EPSILON, show_default=True)
@click.option("--emd-solver", default="auto", show_default=True,
              type=click.Choice(["auto", "exact", "approx"]))
@click.option("--normalize", is_flag=True, help="Divide EMD by the point count.")
@click.pass_context
def cmd_distance(ctx, cloud_a, cloud_b, measure, aligned, alpha, epsilon,
                 emd_solver, normalize):
    """Print the pairwise distance between two cloud files."""
    config = {"cloud_a": cloud_a, "cloud_b": cloud_b, "measure": measure,
              "aligned": aligned, "alpha": alpha, "epsilon": epsilon,
              "emd_solver": emd_solver, "normalize": normalize}
    _echo_config("distance", config)
    try:
        A = load_cloud(cloud_a)
        B = load_cloud(cloud_b)
        solver = emd_solver
        if measure == "emd":
            solver = resolve_emd_solver(emd_solver, max(len(A), len(B)))
        spec = DistanceSpec(measure=measure, aligned=aligned, alpha=alpha,
                            solver=solver, epsilon=epsilon, normalize=normalize)
        value = aligned_distance(A, B, spec)
    except PcevalError as exc:
        _fail(exc)
    click.echo(f"{value:.12g}")
    solver_used = {"cd": "double-scan", "dcd": "double-scan",
                   "emd": f"{solver}-assignment"}[measure]
    click.echo(f"solver: {solver_used}", err=True)


@main.command("eval")
@click.option("--gen", "gen_path", required=True, type=click.Path(exists=True),
              help="Manifest of generated clouds.")
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True),
              help="Manifest of reference clouds.")
@click.option("--measures", default="dcd", show_default=True,
              help="Comma list from cd,emd,dcd.")
@click.option("--metrics", default="mmd,cov,1nna,snc", show_default=True,
              help="Comma list from mmd,cov,1nna,snc,jsd (jsd is opt-in).")
@click.option("--aligned/--no-aligned", default=True, show_default=True)
@click.option("--alpha", type=float, default=DEFAULT_DCD_ALPHA, show_default=True)
@click.option("--epsilon", type=float, default=DEFAULT_EMD_EPSILON, show_default=True)
@click.option("--emd-solver", default="auto", show_default=True,
              type=click.Choice(["auto", "exact", "approx"]))
@click.option("--normalize", is_flag=True)
@click.option("--normals-k", type=int, default=20, show_default=True)
@click.option("--jsd-resolution", type=int, default=DEFAULT_JSD_RESOLUTION,
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Report destination (default: stdout JSON).")
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "csv"]))
@click.option("--table-scaling", is_flag=True,
              help="Record presentation scaling (MMD-DCD x10, MMD-EMD x1e3, "
                   "fractions as percentages).")
@click.pass_context
def cmd_eval(ctx, gen_path, ref_path, measures, metrics, aligned, alpha,
             epsilon, emd_solver, normalize, normals_k, jsd_resolution, out,
             fmt, table_scaling):
    """Evaluate set metrics for generated vs reference manifests."""
    measure_list = tuple(m.strip() for m in measures.split(",") if m.strip())
    metric_list = tuple(m.strip() for m in metrics.split(",") if m.strip())
    config = {"gen": gen_path, "ref": ref_path, "measures": measure_list,
              "metrics": metric_list, "aligned": aligned, "alpha": alpha,
              "epsilon": epsilon, "emd_solver": emd_solver,
              "normalize": normalize, "normals_k": normals_k,
              "jsd_resolution": jsd_resolution, "table_scaling": table_scaling,
              "seed": ctx.obj["seed"]}
    _echo_config("eval", config)
    try:
        gen = load_set(gen_path)
        ref = load_set(ref_path)
        specs = _make_specs(measure_list, aligned, alpha, epsilon, emd_solver,
                            normalize)
        for spec in specs:
            if spec.measure == "emd":
                n = max(max(len(c) for c in gen), max(len(c) for c in ref))
                click.echo(
                    f"emd solver: {resolve_emd_solver(spec.solver, n)}", err=True)
        reports = evaluate_sets(
            gen, ref, metrics=metric_list, specs=specs,
            nspec=NeighborhoodSpec("knn", k=normals_k),
            jsd_resolution=jsd_resolution,
            jsd_aligned=aligned if "jsd" in metric_list else None,
            threads=ctx.obj["threads"],
            apply_table_scaling=table_scaling,
        )
    except PcevalError as exc:
        _fail(exc)
    if out:
        write_report(reports, out, format=fmt, config=config)
        click.echo(f"wrote {out}", err=True)
    else:
        doc = {"version": __version__, "config": config,
               "results": [r.to_dict() for r in reports]}
        click.echo(json.dumps(doc, indent=2, sort_keys=True, default=str))


@main.command("sample")
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--method", default="fps", show_default=True,
              type=click.Choice(["fps", "random"]))
@click.option("-m", "--size", type=int, required=True, help="Points to keep.")
@click.option("--start", type=int, default=0, show_default=True,
              help="Farthest-point start index.")
@click.option("--format", "fmt", default="binary", show_default=True,
              type=click.Choice(["binary", "text"]))
@click.pass_context
def cmd_sample(ctx, cloud_path, out_path, method, size, start, fmt):
    """Subsample a cloud by farthest-point or uniform random selection."""
    config = {"cloud": cloud_path, "out": out_path, "method": method,
              "size": size, "start": start, "seed": ctx.obj["seed"]}
    _echo_config("sample", config)
    try:
        cloud = load_cloud(cloud_path)
        if method == "fps":
            result = fps_sample(cloud, size, start=start)
        else:
            result = random_sample(cloud, size, seed=ctx.obj["seed"])
        save_cloud(result, out_path, format=fmt)
    except PcevalError as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}", err=True)


@main.command("perturb")
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--noise-frac", type=float, default=0.0, show_default=True)
@click.option("--shift-frac", type=float, default=0.0, show_default=True)
@click.option("--format", "fmt", default="binary", show_default=True,
              type=click.Choice(["binary", "text"]))
@click.pass_context
def cmd_perturb(ctx, cloud_path, out_path, noise_frac, shift_frac, fmt):
    """Add diameter-proportional noise and/or a random rigid shift."""
    config = {"cloud": cloud_path, "out": out_path, "noise_frac": noise_frac,
              "shift_frac": shift_frac, "seed": ctx.obj["seed"]}
    _echo_config("perturb", config)
    try:
        cloud = load_cloud(cloud_path)
        cloud = perturb_cloud(cloud, PerturbSpec(noise_frac=noise_frac,
                                                 shift_frac=shift_frac,
                                                 seed=ctx.obj["seed"]))
        save_cloud(cloud, out_path, format=fmt)
    except PcevalError as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}", err=True)


@main.command("normals")
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("-k", "--neighbors", type=int, default=20, show_default=True,
              help="Neighborhood size (ignored with --radius).")
@click.option("--radius", type=float, default=None,
              help="Ball-query radius instead of k nearest.")
@click.pass_context
def cmd_normals(ctx, cloud_path, out_path, neighbors, radius):
    """Estimate plane-fit normals and write a normals file."""
    config = {"cloud": cloud_path, "out": out_path, "k": neighbors,
              "radius": radius}
    _echo_config("normals", config)
    try:
        cloud = load_cloud(cloud_path)
        if radius is not None:
            spec = NeighborhoodSpec("ball", radius=radius)
        else:
            spec = NeighborhoodSpec("knn", k=neighbors)
        field = estimate_normals(cloud, spec)
        save_normals(field.normals, out_path)
    except PcevalError as exc:
        _fail(exc)
    if field.fallback_count:
        click.echo(f"fallback neighborhoods: {field.fallback_count}", err=True)
    click.echo(f"unreliable normals: {int(field.unreliable.sum())}", err=True)
    click.echo(f"wrote {out_path}", err=True)


@main.command("sweep")
@click.option("--gen", "gen_path", required=True, type=click.Path(exists=True))
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--noise-grid", default="0", show_default=True,
              help="Comma list of noise fractions, ascending.")
@click.option("--shift-grid", default="0", show_default=True,
              help="Comma list of shift fractions, ascending.")
@click.option("--seeds", type=int, default=1, show_default=True,
              help="Random repetitions per grid level.")
@click.option("--measures", default="dcd", show_default=True)
@click.option("--metrics", default="mmd", show_default=True)
@click.option("--aligned/--no-aligned", default=True, show_default=True)
@click.option("--alpha", type=float, default=DEFAULT_DCD_ALPHA, show_default=True)
@click.option("--epsilon", type=float, default=DEFAULT_EMD_EPSILON, show_default=True)
@click.option("--emd-solver", default="auto", show_default=True,
              type=click.Choice(["auto", "exact", "approx"]))
@click.option("--sampling", default="none", show_default=True,
              type=click.Choice(["none", "uniform", "random"]))
@click.option("--sample-size", type=int, default=None)
@click.option("--normals-k", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--format", "fmt", default="csv", show_default=True,
              type=click.Choice(["csv", "json"]))
@click.pass_context
def cmd_sweep(ctx, gen_path, ref_path, noise_grid, shift_grid, seeds, measures,
              metrics, aligned, alpha, epsilon, emd_solver, sampling,
              sample_size, normals_k, out, fmt):
    """Run a noise/shift robustness sweep and write the result table."""
    noise = tuple(float(v) for v in noise_grid.split(","))
    shift_levels = tuple(float(v) for v in shift_grid.split(","))
    measure_list = tuple(m.strip() for m in measures.split(",") if m.strip())
    metric_list = tuple(m.strip() for m in metrics.split(",") if m.strip())
    config = {"gen": gen_path, "ref": ref_path, "noise_grid": noise,
              "shift_grid": shift_levels, "seeds": seeds,
              "measures": measure_list, "metrics": metric_list,
              "aligned": aligned, "alpha": alpha, "epsilon": epsilon,
              "emd_solver": emd_solver, "sampling": sampling,
              "sample_size": sample_size, "normals_k": normals_k,
              "seed": ctx.obj["seed"]}
    _echo_config("sweep", config)
    try:
        gen = load_set(gen_path)
        ref = load_set(ref_path)
        sweep_config = SweepConfig(
            noise_grid=noise, shift_grid=shift_levels, metrics=metric_list,
            specs=_make_specs(measure_list, aligned, alpha, epsilon,
                              emd_solver, False),
            seeds_per_level=seeds, seed=ctx.obj["seed"], sampling=sampling,
            sample_size=sample_size,
            nspec=NeighborhoodSpec("knn", k=normals_k),
        )
        result = run_sweep(gen, ref, sweep_config, threads=ctx.obj["threads"])
        write_sweep(result, out, format=fmt, config=config)
    except PcevalError as exc:
        _fail(exc)
    click.echo(f"wrote {out}", err=True)


if __name__ == "__main__":
    main()
