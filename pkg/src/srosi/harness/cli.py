"""``srosi`` command line: generate data, solve, and run the studies.

Exit codes: 0 on success, 1 on configuration errors (bad arguments,
unreadable files, invalid schemas), 2 when a solve or an experiment row
fails.  Experiment CSVs are still written when rows fail, so partial runs
can be inspected.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from srosi.errors import (
    InnerInfeasible,
    InvalidParameter,
    IterLimit,
    NoMass,
    SolveFailed,
    TooLarge,
    UnsupportedNorm,
)
from srosi.harness import generators
from srosi.harness.experiment import (
    config_from_json,
    run_concentration,
    run_convergence,
    run_experiment,
)
from srosi.multistage import (
    UncertaintySpec,
    problem_from_json,
    problem_to_json,
    solve_sro,
)
from srosi.portfolio import PortfolioProblem, solve_cvar_portfolio
from srosi.weights import (
    KernelKind,
    ScheduleParams,
    WeightVector,
    cart_weights,
    fit_cart,
    fit_forest,
    kernel_weights,
    knn_weights,
    read_dataset_csv,
    rf_weights,
    write_dataset_csv,
)

_CONFIG_ERRORS = (InvalidParameter, UnsupportedNorm, TooLarge)
_SOLVE_ERRORS = (InnerInfeasible, SolveFailed, IterLimit, NoMass)


def _fail(code: int, message: str):
    click.echo(f"srosi: {message}", err=True)
    sys.exit(code)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise InvalidParameter(f"cannot parse vector {text!r}") from None


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise InvalidParameter(f"cannot parse integer list {text!r}") from None


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidParameter(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"{path}: invalid JSON ({exc})") from exc


def _weights_at(data, flavor, query, k, h, kernel, min_leaf, b_trees, seed):
    if flavor == "uniform":
        return WeightVector(np.full(data.n, 1.0 / data.n))
    if query is None:
        raise InvalidParameter(f"--weights {flavor} requires --query")
    q = _parse_vector(query)
    if flavor == "knn":
        if k is None:
            raise InvalidParameter("--weights knn requires --k")
        return knn_weights(data, q, k)
    if flavor == "kernel":
        if h is None:
            raise InvalidParameter("--weights kernel requires --h")
        return kernel_weights(data, q, h, KernelKind(kernel))
    if flavor == "cart":
        return cart_weights(fit_cart(data, min_leaf=min_leaf), q)
    forest = fit_forest(data, b_trees=b_trees, min_leaf=min_leaf, seed=seed)
    return rf_weights(forest, q)


_WEIGHT_CHOICES = click.Choice(["uniform", "knn", "kernel", "cart", "rf"])
_KERNEL_CHOICES = click.Choice([k.value for k in KernelKind])


def _weight_options(fn):
    for opt in reversed(
        [
            click.option("--weights", default="uniform", type=_WEIGHT_CHOICES,
                         show_default=True, help="Weight function family."),
            click.option("--query", default=None,
                         help="Covariate vector, comma separated."),
            click.option("--k", type=int, default=None, help="kNN neighbor count."),
            click.option("--h", type=float, default=None, help="Kernel bandwidth."),
            click.option("--kernel", default="gaussian", type=_KERNEL_CHOICES,
                         show_default=True),
            click.option("--min-leaf", type=int, default=5, show_default=True),
            click.option("--b-trees", type=int, default=50, show_default=True),
            click.option("--model-seed", type=int, default=0, show_default=True,
                         help="Seed for forest fitting."),
        ]
    ):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Sample robust optimization with side information."""


@main.command()
@click.option("--family", required=True,
              type=click.Choice(["newsvendor", "inventory", "portfolio", "shipment"]))
@click.option("--n", "n_samples", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Dataset CSV path.")
@click.option("--problem-out", default=None, type=click.Path(),
              help="Also write the family's decision problem as JSON.")
def generate(family, n_samples, seed, out, problem_out):
    """Draw a dataset (and optionally the decision problem) for a family."""
    try:
        result = generators.family_by_name(family)(n_samples, seed)
        write_dataset_csv(out, result.data)
        if problem_out is not None:
            if not hasattr(result, "problem"):
                raise InvalidParameter(
                    f"family {family!r} has no dynamic problem to export"
                )
            with open(problem_out, "w") as fh:
                json.dump(problem_to_json(result.problem), fh, indent=1)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    click.echo(f"wrote {n_samples} samples to {out}")


@main.command()
@click.option("--problem", "problem_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--eps", type=float, default=0.0, show_default=True)
@click.option("--norm", default="linf", type=click.Choice(["l1", "linf"]),
              show_default=True)
@click.option("--support", default="orthant",
              type=click.Choice(["orthant", "free"]), show_default=True)
@click.option("--shared-recourse", is_flag=True,
              help="One auxiliary rule shared by all samples.")
@click.option("--out", default=None, type=click.Path(),
              help="Solution JSON path (default: stdout).")
@_weight_options
def solve(problem_path, data_path, eps, norm, support, shared_recourse, out,
          weights, query, k, h, kernel, min_leaf, b_trees, model_seed):
    """Solve the robust multi-stage problem at a covariate query."""
    try:
        prob = problem_from_json(_load_json(problem_path))
        data = read_dataset_csv(data_path, stage_dims=prob.xi_dims)
        w = _weights_at(data, weights, query, k, h, kernel, min_leaf,
                        b_trees, model_seed)
        spec = UncertaintySpec(eps=eps, norm=norm, support=support)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    try:
        sol = solve_sro(prob, data, w, spec, shared_recourse=shared_recourse,
                        drop_zero_weight=True)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    except _SOLVE_ERRORS as exc:
        _fail(2, str(exc))
    doc = {
        "objective": sol.objective,
        "x0": sol.policy.x0.tolist(),
        "x_mat": sol.policy.x_mat.tolist(),
        "contributions": [float(v) for v in sol.contributions],
        "eps": eps,
        "norm": norm,
        "support": support,
        "n_samples": data.n,
    }
    text = json.dumps(doc, indent=1)
    if out is None:
        click.echo(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote solution to {out}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(),
              help="Returns CSV (g1..gk,x1..xn header).")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True,
              help="Risk-return trade-off weight.")
@click.option("--eps", type=float, default=0.0, show_default=True)
@click.option("--norm", default="linf", type=click.Choice(["l1", "linf"]),
              show_default=True)
@click.option("--out", default=None, type=click.Path())
@_weight_options
def portfolio(data_path, alpha, lam, eps, norm, out,
              weights, query, k, h, kernel, min_leaf, b_trees, model_seed):
    """Solve the mean-cVaR portfolio problem at a covariate query."""
    try:
        with open(data_path, newline="") as fh:
            header = fh.readline().strip().split(",")
        d_xi = sum(1 for name in header if name.startswith("x"))
        if d_xi == 0:
            raise InvalidParameter(f"{data_path}: no x-columns in header")
        data = read_dataset_csv(data_path, stage_dims=(d_xi,))
        prob = PortfolioProblem(n=data.d_xi, alpha=alpha, lam=lam)
        w = _weights_at(data, weights, query, k, h, kernel, min_leaf,
                        b_trees, model_seed)
    except OSError as exc:
        _fail(1, f"cannot read {data_path}: {exc}")
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    try:
        sol = solve_cvar_portfolio(prob, data, w, eps, norm=norm)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    except _SOLVE_ERRORS as exc:
        _fail(2, str(exc))
    doc = {
        "value": sol.value,
        "x": sol.x.tolist(),
        "beta": sol.beta,
        "alpha": alpha,
        "lambda": lam,
        "eps": eps,
        "norm": norm,
    }
    text = json.dumps(doc, indent=1)
    if out is None:
        click.echo(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote solution to {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Result CSV path.")
def experiment(config_path, out):
    """Run a method-comparison experiment from a JSON config."""
    try:
        config = config_from_json(_load_json(config_path))
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    rows = run_experiment(config, out_path=out)
    failed = [r for r in rows if r.status != "ok"]
    click.echo(f"wrote {len(rows)} rows to {out} ({len(failed)} failed)")
    if failed:
        _fail(2, f"{len(failed)} of {len(rows)} rows failed")


def _schedule_options(k1_default, p_default):
    def wrap(fn):
        for opt in reversed(
            [
                click.option("--k1", type=float, default=k1_default,
                             show_default=True,
                             help="Radius constant: eps_N = k1 / N**p."),
                click.option("--p", type=float, default=p_default,
                             show_default=True, help="Radius exponent."),
                click.option("--delta", type=float, default=0.75,
                             show_default=True,
                             help="Neighbor-count exponent."),
                click.option("--k3", type=float, default=1.0, show_default=True,
                             help="Neighbor count: k_N = ceil(k3 * N**delta)."),
            ]
        ):
            fn = opt(fn)
        return fn

    return wrap


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--n-grid", default="50,200,800,3200", show_default=True)
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_schedule_options(k1_default=1.0, p_default=0.08)
def concentration(out, n_grid, reps, seed, k1, p, delta, k3):
    """Transport-distance concentration study on the newsvendor family."""
    try:
        sched = ScheduleParams(method="knn", k1=k1, p=p, delta=delta, k3=k3)
        grid = _parse_int_list(n_grid)
        rows = run_concentration(grid, reps, sched, seed=seed, out_path=out)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--n-grid", default="50,2000", show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_schedule_options(k1_default=0.1, p_default=0.16)
def convergence(out, n_grid, reps, seed, k1, p, delta, k3):
    """Scheduled-solve convergence study on the newsvendor family."""
    try:
        sched = ScheduleParams(method="knn", k1=k1, p=p, delta=delta, k3=k3)
        grid = _parse_int_list(n_grid)
        rows = run_convergence(grid, reps, sched, seed=seed, out_path=out)
    except _CONFIG_ERRORS as exc:
        _fail(1, str(exc))
    except _SOLVE_ERRORS as exc:
        _fail(2, str(exc))
    click.echo(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()
