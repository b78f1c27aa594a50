"""Command-line interface: ``dras solve | stress | simulate | cv | sample | experiment``."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .duration import build_direct_lp_p1
from .errors import DrasError
from .harness import (
    ExperimentConfig,
    cross_validate_epsilon,
    infer_model_support,
    load_schedule,
    parse_grid,
    run_experiment,
    solve_model,
    stress_test,
)
from .lp import write_lp_dump
from .noshow import build_direct_lp_noshow_p1, network_for
from .schedule import Instance, SampleSet
from .stochastics import GeneratorSpec, make_rng, sample, scenario_costs

MODEL = click.option("--model", type=click.Choice(["duration", "noshow"]), default="duration", show_default=True)
INSTANCE = click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True,
                        help="Instance JSON (n, T, c, d, C and optional uL, uU, K).")
SAMPLES = click.option("--samples", "samples_path", type=click.Path(exists=True, dir_okay=False), required=True,
                       help="Sample CSV; no-show files carry 2n columns [mu, lambda].")


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _load(instance_path, samples_path, model):
    inst = Instance.load(instance_path)
    samples = SampleSet.from_csv(samples_path, n=inst.n, noshow=(model == "noshow"))
    return inst, samples


def _guard(fn):
    """Report package and input errors as clean CLI failures."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DrasError, ValueError, KeyError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Distributionally robust appointment scheduling over Wasserstein balls."""


@main.command()
@MODEL
@INSTANCE
@SAMPLES
@click.option("--epsilon", type=float, default=0.0, show_default=True, help="Wasserstein radius.")
@click.option("--p", "p", type=float, default=1.0, show_default=True, help="Wasserstein order (>= 1).")
@click.option("--method", type=click.Choice(["auto", "lp", "cp"]), default="auto", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Solution JSON (default: stdout).")
@click.option("--dump-lp", type=click.Path(dir_okay=False), default=None,
              help="Also write the p=1 direct LP in the plain-text dump format.")
@_guard
def solve(model, instance_path, samples_path, epsilon, p, method, out, dump_lp):
    """Solve for the robust schedule and print {s, rho, objective, diagnostics}."""
    inst, samples = _load(instance_path, samples_path, model)
    sol = solve_model(samples, inst, epsilon, model, p, method)
    if dump_lp:
        sup = infer_model_support(samples, inst, model)
        if model == "duration":
            lp, _ = build_direct_lp_p1(samples.values, sup, inst.costs, epsilon, inst.T)
        else:
            lam = samples.shows if samples.shows is not None else np.ones_like(samples.values)
            lp, _ = build_direct_lp_noshow_p1(samples.values, lam, network_for(inst.costs, sup.K), sup, inst.costs,
                                              epsilon, inst.T)
        write_lp_dump(lp, dump_lp)
    _emit(sol.to_dict(), out)


@main.command()
@MODEL
@INSTANCE
@SAMPLES
@click.option("--schedule", "schedule_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Solution JSON with an \"s\" entry, or a one-row CSV.")
@click.option("--epsilon", type=float, required=True, help="Wasserstein radius (p = 1).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guard
def stress(model, instance_path, samples_path, schedule_path, epsilon, out):
    """Worst-case distribution of a given schedule, with a ball-membership certificate."""
    inst, samples = _load(instance_path, samples_path, model)
    report = stress_test(schedule_path, samples, inst, epsilon, model)
    _emit(report.to_dict(), out)
    if not report.certified:
        sys.exit(2)


@main.command()
@MODEL
@INSTANCE
@click.option("--schedule", "schedule_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scenarios", "scenarios_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Scenario CSV in the sample format.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guard
def simulate(model, instance_path, schedule_path, scenarios_path, out):
    """Mean cost of a schedule over a scenario file."""
    inst, scen = _load(instance_path, scenarios_path, model)
    s = load_schedule(schedule_path, inst.T)
    c = scenario_costs(s, scen, inst.costs, model)
    _emit({"mean": float(c.mean()), "std": float(c.std(ddof=1)) if c.size > 1 else 0.0, "scenarios": int(c.size)}, out)


@main.command()
@MODEL
@INSTANCE
@SAMPLES
@click.option("--grid", "grid_spec", default="default", show_default=True,
              help="'default', a comma list, or start:stop:step ranges.")
@click.option("--partitions", type=int, default=30, show_default=True)
@click.option("--p", "p", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guard
def cv(model, instance_path, samples_path, grid_spec, partitions, p, seed, out):
    """Cross-validate the radius over a grid."""
    inst, samples = _load(instance_path, samples_path, model)
    res = cross_validate_epsilon(samples, inst, parse_grid(grid_spec), partitions, model=model, p=p,
                                 rng=make_rng(seed, "cv"), details=True)
    _emit({"epsilon": res.epsilon, "chosen": res.chosen.tolist(), "grid": res.grid.tolist(),
           "train_size": res.n_train}, out)


@main.command(name="sample")
@MODEL
@click.option("--generator", "generator_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Generator spec JSON; otherwise parameters are drawn for --family.")
@click.option("--family", type=click.Choice(["LN", "UB", "NG"]), default="LN", show_default=True)
@click.option("--n", "n", type=int, default=10, show_default=True)
@click.option("--N", "N", type=int, required=True, help="Number of scenarios.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def sample_cmd(model, generator_path, family, n, N, seed, out):
    """Draw scenarios from a generator and write them as sample CSV."""
    if generator_path:
        spec = GeneratorSpec.load(generator_path)
    else:
        spec = GeneratorSpec.draw(family, n, seed, noshow_prob=0.4 if model == "noshow" else None)
    sample(spec, N, model, make_rng(seed, "cli-sample")).to_csv(out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Overrides the config's out_dir.")
@click.option("--workers", type=int, default=None, help="Parallel worker processes (0 = all cores).")
@_guard
def experiment(config_path, out_dir, workers):
    """Run a convergence, reliability or misspecification experiment and write CSVs."""
    cfg = ExperimentConfig.load(config_path)
    if out_dir is not None:
        cfg.out_dir = out_dir
    if workers is not None:
        cfg.workers = workers
    if cfg.out_dir is None:
        cfg.out_dir = "."
    result = run_experiment(cfg)
    for row in result.summary():
        click.echo(
            f"N={row['N']:<5} {row['method']:<7} eps={row['epsilon_mean']:.4g} "
            f"oos={row['out_of_sample_mean']:.4f} [p20 {row['out_of_sample_p20']:.4f}, "
            f"p80 {row['out_of_sample_p80']:.4f}] reliability={row['reliability']:.2f} failed={row['failed']}"
        )
    if result.z_star is not None:
        click.echo(f"Z* proxy: {result.z_star:.6f}")


if __name__ == "__main__":  # pragma: no cover
    main()
