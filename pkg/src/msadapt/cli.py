"""Command-line entry points.

The ``MSA_SEED`` environment variable, when set, overrides every seed —
config files, flags, and defaults alike.
"""

from __future__ import annotations

import json
import os
from dataclasses import replace

import click
import numpy as np

from . import estimators as est_mod, harness, knn_demo, model
from . import oracle as oracle_mod


def _seed_override(default):
    env = os.environ.get("MSA_SEED")
    if env:
        return int(env)
    return int(default)


def _echo_json(payload):
    click.echo(json.dumps(payload, sort_keys=True))


@click.group()
def main():
    """Multi-source mean estimation: simulations, oracles, and estimators."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Experiment description (key = value lines).")
@click.option("--fast", is_flag=True, help="Run 50 replicates instead of 500.")
@click.option("--workers", default=1, show_default=True,
              help="Worker processes; the output is identical for any count.")
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False),
              help="Directory for the result CSV.")
def simulate(config_path, fast, workers, out_dir):
    """Run the experiment described by a config file."""
    with open(config_path, encoding="utf-8") as fh:
        spec = harness.parse_config(fh.read())
    spec = replace(spec, seed=_seed_override(spec.seed))
    if fast:
        spec = replace(spec, reps=50)
    rows = harness.run_experiment(spec, workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, spec.out or f"{spec.label}_mse.csv")
    harness.write_rows(rows, path)
    click.echo(path)


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip() != ""]


@main.command("oracle-rate")
@click.option("--h", "h_text", required=True,
              help="Comma-separated source bias bounds.")
@click.option("--n", "n_text", required=True,
              help="Comma-separated source sample sizes.")
@click.option("--n0", required=True, type=int, help="Target sample size.")
@click.option("--d", required=True, type=int, help="Dimension.")
@click.option("--tau", default=1.0, show_default=True, help="Noise scale.")
@click.option("--bound", default=None, type=float,
              help="Bias ceiling when any h exceeds 1.")
@click.option("--breakdown", is_flag=True,
              help="Include every prefix subset's variance/bias split.")
def oracle_rate_cmd(h_text, n_text, n0, d, tau, bound, breakdown):
    """Print the subset-optimal rate and its pooling set as JSON."""
    h = np.array(_floats(h_text))
    sizes = model.SampleSizes(n0, np.array(_ints(n_text)))
    kwargs = {} if bound is None else {"bound": bound}
    config = model.BiasConfiguration(h, **kwargs)
    result = oracle_mod.oracle_rate(config, sizes, d, tau, breakdown=breakdown)
    payload = {
        "rate": result.rate,
        "argmin_set": list(result.argmin_set.sorted_members),
        "d": d,
        "tau": tau,
    }
    if breakdown:
        payload["breakdown"] = [
            {"set": list(mask.sorted_members), "variance": var, "bias_sq": b2}
            for mask, var, b2 in result.per_set_breakdown
        ]
    _echo_json(payload)


_ESTIMATE_NAMES = (
    "naive", "two_source", "model_selection", "intersection",
    "elimination", "two_cluster", "clustering",
)


@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON with theta_tilde (m+1 rows), n0, n, tau.")
@click.option("--estimator", "name", required=True,
              type=click.Choice(_ESTIMATE_NAMES))
@click.option("--delta", default=None, type=float,
              help="Confidence level (two_source, intersection).")
@click.option("--feasibility", default="pairwise", show_default=True,
              type=click.Choice(["pairwise", "exact"]),
              help="Ball-intersection test (intersection).")
@click.option("--alpha", default=1.0, show_default=True,
              help="Threshold exponent (elimination).")
@click.option("--elim-tau", default=None, type=float,
              help="Noise scale for the elimination threshold.")
@click.option("--k-clusters", default=None, type=int,
              help="Cluster count (clustering; default 2).")
@click.option("--c-thresh", default=None, type=float,
              help="Cluster inclusion threshold (default 2 log(m n)).")
@click.option("--family", default="prefix", show_default=True,
              type=click.Choice(["prefix", "full"]),
              help="Candidate subsets (model_selection).")
@click.option("--seed", default=0, show_default=True,
              help="k-means seed (clustering).")
def estimate(input_path, name, delta, feasibility, alpha, elim_tau,
             k_clusters, c_thresh, family, seed):
    """Apply one estimator to externally supplied local estimates."""
    with open(input_path, encoding="utf-8") as fh:
        data = json.load(fh)
    tt = np.atleast_2d(np.asarray(data["theta_tilde"], dtype=float))
    sizes = model.SampleSizes(int(data["n0"]), np.asarray(data["n"], dtype=int))
    if tt.shape[0] != sizes.m + 1:
        raise click.ClickException(
            f"theta_tilde has {tt.shape[0]} rows but n lists {sizes.m} sources"
        )
    tau = float(data["tau"])
    d = tt.shape[1]
    est = model.LocalEstimates(tt, (0, 0))
    seed = _seed_override(seed)
    payload = {"estimator": name}
    if name == "naive":
        vec = est_mod.naive(est)
    elif name == "two_source":
        vec = est_mod.two_source_structured(est, sizes, tau, delta)
    elif name == "model_selection":
        fam = (est_mod.prefix_family(sizes.m) if family == "prefix"
               else est_mod.full_subset_family(sizes.m))
        split = est_mod.TargetSplit.practical(est, sizes)
        vec = est_mod.model_selection(est, sizes, fam, split)
    elif name == "intersection":
        if delta is None:
            delta = est_mod.default_delta_intersection(sizes, d, tau)
        vec, t_hat = est_mod.intersection_estimator(
            est, sizes, tau, delta, feasibility=feasibility
        )
        payload["t_hat"] = t_hat
    elif name == "elimination":
        params = est_mod.EliminationParams(
            tau=elim_tau if elim_tau is not None else tau, alpha=alpha
        )
        vec, mask = est_mod.elimination_estimator(est, sizes, d, params)
        payload["kept"] = list(mask.sorted_members)
    elif name == "two_cluster":
        splits = model.reuse_as_splits(est, sizes)
        vec = est_mod.two_cluster_adaptive(splits)
    else:  # clustering
        k = k_clusters if k_clusters is not None else min(2, sizes.m)
        if c_thresh is None:
            import math

            c_thresh = 2.0 * math.log(sizes.m * float(sizes.all_sizes().max()))
        vec = est_mod.practical_clustering_estimator(
            est, sizes, d, k, c_thresh, seed=seed
        )
    payload["estimate"] = [float(v) for v in np.atleast_1d(vec)]
    _echo_json(payload)


@main.command("knn-demo")
@click.option("--alpha", default=1.0, show_default=True,
              help="Smoothness of the test function.")
@click.option("--m-grid", default="256,512,1024,2048,4096,8192",
              show_default=True, help="Comma-separated sample sizes.")
@click.option("--reps", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default="knn_rates.csv", show_default=True,
              type=click.Path(dir_okay=False))
def knn_demo_cmd(alpha, m_grid, reps, seed, out_path):
    """Monte Carlo rates for the adaptive nearest-neighbor regressor."""
    seed = _seed_override(seed)
    grid = _ints(m_grid)
    f = knn_demo.holder_function(alpha)
    rows = []
    for rec in knn_demo.rate_sweep(f, alpha, grid, reps, seed):
        rows.append(harness.ResultRow(
            config="knn", d=1, m=rec["m"], n=1, n0=0,
            param=rec["alpha"], estimator="adaptive_knn",
            mse_mean=rec["mse_mean"], mse_stderr=rec["mse_stderr"],
            reps=reps, seed=seed,
            extra=json.dumps({"mean_k_hat": rec["mean_k_hat"]},
                             sort_keys=True, separators=(",", ":")),
        ))
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    harness.write_rows(rows, out_path)
    click.echo(out_path)


@main.command("reproduce-figures")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False),
              help="Directory for CSVs and figure PNGs.")
@click.option("--fast", is_flag=True, help="50 replicates instead of 500.")
@click.option("--workers", default=1, show_default=True)
@click.option("--no-plots", is_flag=True, help="Write CSVs only.")
def reproduce_figures_cmd(out_dir, fast, workers, no_plots):
    """Rerun the standard comparison grids; write CSVs and PNG renders."""
    seed = _seed_override(0)
    outputs = harness.reproduce_figures(
        out_dir, fast=fast, workers=workers, plots=not no_plots, seed=seed
    )
    for key in sorted(outputs):
        click.echo(f"{key}: {outputs[key]}")


if __name__ == "__main__":
    main()