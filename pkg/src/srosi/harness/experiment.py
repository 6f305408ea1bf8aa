"""Experiment drivers: method-comparison runs, concentration, convergence.

The comparison protocol per replication mirrors the usual tuned-predictor
benchmark: draw a training set and a query point, tune the (radius, weight
parameter) combination on a validation split, refit on the full training
set, then score the resulting decision on scenarios drawn from the *true*
conditional distribution at the query.  Methods inside one replication
share the training data, the query, and the test draws, so cross-method
comparisons are paired.

Method taxonomy (radius x weights):

====================  ==========  ==============
method                radius      weights
====================  ==========  ==============
saa                   0           uniform
sro                   tuned > 0   uniform
ptp-<w>               0           ml (<w>)
srosi-<w>             tuned > 0   ml (<w>)
====================  ==========  ==============

with ``<w>`` one of ``knn``, ``kernel``, ``cart``, ``rf``.

Tuning solves: uniform-weight methods produce one decision per candidate
combination (weights do not depend on the query), which is then scored on
every validation point; ML-weighted methods re-solve at each validation
point's covariates.  When only one candidate combination exists the
validation stage is skipped entirely.

Out-of-sample scoring always re-solves the recourse exactly per scenario
(never the fitted auxiliary rules).  Portfolio decisions are scored by the
empirical mean--cVaR of realized losses with the cVaR recomputed exactly
on the scoring sample by sorting: beta is an auxiliary variable of the
reformulation, not part of the investment decision, so the realized
objective re-optimizes it.
"""

from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from srosi.errors import InvalidParameter, SrosiError
from srosi.harness import generators
from srosi.multistage import UncertaintySpec, evaluate_policy, solve_sro
from srosi.portfolio import PortfolioProblem, solve_cvar_portfolio
from srosi.transport import empirical_conditional, wasserstein1_1d_vs_uniform
from srosi.weights import (
    Dataset,
    KernelKind,
    ScheduleParams,
    WeightVector,
    cart_weights,
    default_schedules,
    fit_cart,
    fit_forest,
    kernel_weights,
    knn_weights,
    rf_weights,
)

_UNIFORM_METHODS = {"saa": 0, "sro": 1}
_ML_FLAVORS = ("knn", "kernel", "cart", "rf")
_FAMILY_TYPES = {
    "newsvendor": generators.NewsvendorFamily,
    "inventory": generators.InventoryFamily,
    "portfolio": generators.PortfolioFamily,
    "shipment": generators.ShipmentFamily,
}
_CSV_HEADER = ["method", "N", "eps", "params", "rep", "oos_cost", "solve_s", "status"]
_CONFIG_FORMAT = "srosi-experiment"
_CONFIG_VERSION = 1


def canonical_method(name: str) -> str:
    """Lower-case method id; raises on anything outside the taxonomy."""
    m = str(name).strip().lower()
    if m in _UNIFORM_METHODS:
        return m
    for prefix in ("ptp-", "srosi-"):
        if m.startswith(prefix) and m[len(prefix):] in _ML_FLAVORS:
            return m
    raise InvalidParameter(
        f"unknown method {name!r}; expected saa, sro, or "
        "ptp-/srosi- prefixed knn|kernel|cart|rf"
    )


def _method_parts(method: str) -> tuple[bool, str | None]:
    """(robust?, weight flavor or None for uniform)."""
    if method == "saa":
        return False, None
    if method == "sro":
        return True, None
    kind, flavor = method.split("-", 1)
    return kind == "srosi", flavor


@dataclass(frozen=True)
class ExperimentConfig:
    """One comparison run: families x methods x sample sizes x replications.

    ``weight_grid`` maps a weight flavor to its parameter grid, e.g.
    ``{"knn": {"k": (5, 10, 20)}, "kernel": {"h": (0.25, 0.5)}}``; every ML
    flavor referenced by ``methods`` must appear.  ``eps_grid`` is the
    candidate-radius grid for the robust methods (absolute radii; the
    experiment tunes rather than schedules them).  ``alpha``/``lam`` only
    matter for the portfolio family.
    """

    generator: str
    methods: tuple[str, ...]
    eps_grid: tuple[float, ...]
    weight_grid: Mapping[str, Mapping[str, tuple]] = field(default_factory=dict)
    n_grid: tuple[int, ...] = (50,)
    reps: int = 1
    n_test: int = 1000
    val_fraction: float = 0.25
    seed: int = 0
    norm: str = "linf"
    support: str = "orthant"
    alpha: float = 0.05
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(
            self, "methods", tuple(canonical_method(m) for m in self.methods)
        )
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.generator not in _FAMILY_TYPES:
            raise InvalidParameter(
                f"unknown generator {self.generator!r}; "
                f"choose from {sorted(_FAMILY_TYPES)}"
            )
        if not self.methods:
            raise InvalidParameter("methods grid must be nonempty")
        if not self.n_grid or any(n < 2 for n in self.n_grid):
            raise InvalidParameter("n_grid must be nonempty with N >= 2")
        if not self.eps_grid:
            raise InvalidParameter("eps_grid must be nonempty")
        if any(e < 0 or not np.isfinite(e) for e in self.eps_grid):
            raise InvalidParameter("eps_grid entries must be finite and >= 0")
        if any(e <= 0 for e in self.eps_grid) and any(
            _method_parts(m)[0] for m in self.methods
        ):
            raise InvalidParameter("robust methods need eps_grid entries > 0")
        if self.reps < 1:
            raise InvalidParameter("reps must be >= 1")
        if self.n_test < 1:
            raise InvalidParameter("n_test must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidParameter("val_fraction must lie in (0, 1)")
        for m in self.methods:
            flavor = _method_parts(m)[1]
            if flavor is not None and flavor not in self.weight_grid:
                raise InvalidParameter(
                    f"method {m!r} needs a weight_grid entry for {flavor!r}"
                )
        for flavor, grid in self.weight_grid.items():
            if flavor not in _ML_FLAVORS:
                raise InvalidParameter(f"unknown weight flavor {flavor!r}")
            if not grid or any(len(tuple(v)) == 0 for v in grid.values()):
                raise InvalidParameter(f"weight grid for {flavor!r} must be nonempty")


def config_to_json(config: ExperimentConfig) -> dict:
    return {
        "format": _CONFIG_FORMAT,
        "version": _CONFIG_VERSION,
        "generator": config.generator,
        "methods": list(config.methods),
        "eps_grid": list(config.eps_grid),
        "weight_grid": {
            flavor: {k: list(v) for k, v in grid.items()}
            for flavor, grid in config.weight_grid.items()
        },
        "n_grid": list(config.n_grid),
        "reps": config.reps,
        "n_test": config.n_test,
        "val_fraction": config.val_fraction,
        "seed": config.seed,
        "norm": config.norm,
        "support": config.support,
        "alpha": config.alpha,
        "lam": config.lam,
    }


def config_from_json(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise InvalidParameter("experiment config must be a JSON object")
    if doc.get("format") != _CONFIG_FORMAT:
        raise InvalidParameter(
            f"config format {doc.get('format')!r}, expected {_CONFIG_FORMAT!r}"
        )
    if doc.get("version") != _CONFIG_VERSION:
        raise InvalidParameter(
            f"config version {doc.get('version')!r}, expected {_CONFIG_VERSION}"
        )
    known = {
        "generator", "methods", "eps_grid", "weight_grid", "n_grid", "reps",
        "n_test", "val_fraction", "seed", "norm", "support", "alpha", "lam",
    }
    extra = set(doc) - known - {"format", "version"}
    if extra:
        raise InvalidParameter(f"unknown config keys {sorted(extra)}")
    kwargs = {k: doc[k] for k in known if k in doc}
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "eps_grid" in kwargs:
        kwargs["eps_grid"] = tuple(kwargs["eps_grid"])
    if "n_grid" in kwargs:
        kwargs["n_grid"] = tuple(kwargs["n_grid"])
    if "weight_grid" in kwargs:
        kwargs["weight_grid"] = {
            flavor: {k: tuple(v) for k, v in grid.items()}
            for flavor, grid in kwargs["weight_grid"].items()
        }
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise InvalidParameter(f"bad experiment config: {exc}") from exc


@dataclass(frozen=True)
class ResultRow:
    """One (method, N, replication) outcome; ``status`` is ``"ok"`` or the
    error class that aborted the row (the cost is then NaN, never dropped)."""

    method: str
    n: int
    eps: float
    params: str
    rep: int
    oos_cost: float
    solve_s: float
    status: str


def emit_csv(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(_CSV_HEADER)
        for r in rows:
            out.writerow(
                [
                    r.method,
                    r.n,
                    repr(r.eps),
                    r.params,
                    r.rep,
                    repr(r.oos_cost),
                    repr(r.solve_s),
                    r.status,
                ]
            )


def parse_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != _CSV_HEADER:
        raise InvalidParameter(
            f"{path}: expected header {','.join(_CSV_HEADER)}"
        )
    out = []
    for raw in rows[1:]:
        if len(raw) != len(_CSV_HEADER):
            raise InvalidParameter(f"{path}: ragged row {raw!r}")
        out.append(
            ResultRow(
                method=raw[0],
                n=int(raw[1]),
                eps=float(raw[2]),
                params=raw[3],
                rep=int(raw[4]),
                oos_cost=float(raw[5]),
                solve_s=float(raw[6]),
                status=raw[7],
            )
        )
    return out


# --------------------------------------------------------------------------
# Weight engines: fit once per (dataset, parameters), query many times
# --------------------------------------------------------------------------


class _WeightEngine:
    """Weights-at-query for one flavor/parameter set over one dataset.

    Tree and forest models are fit here once, so validation tuning pays the
    fitting cost per candidate rather than per validation point.  ``k`` is
    clamped to the dataset size so one grid serves both the fit split and
    the full training set.
    """

    def __init__(self, flavor: str | None, params: Mapping, data: Dataset, seed: int):
        self.flavor = flavor
        self.params = dict(params)
        self.data = data
        self.model = None
        if flavor == "cart":
            self.model = fit_cart(
                data,
                min_leaf=int(self.params.get("min_leaf", 5)),
                max_depth=int(self.params.get("max_depth", 16)),
            )
        elif flavor == "rf":
            self.model = fit_forest(
                data,
                b_trees=int(self.params.get("b_trees", 50)),
                min_leaf=int(self.params.get("min_leaf", 5)),
                max_depth=int(self.params.get("max_depth", 16)),
                seed=seed,
            )

    def at(self, query: np.ndarray) -> WeightVector:
        if self.flavor is None:
            return WeightVector(np.full(self.data.n, 1.0 / self.data.n))
        if self.flavor == "knn":
            k = min(int(self.params["k"]), self.data.n)
            return knn_weights(self.data, query, k)
        if self.flavor == "kernel":
            kind = KernelKind(self.params.get("kernel", "gaussian"))
            return kernel_weights(self.data, query, float(self.params["h"]), kind)
        if self.flavor == "cart":
            return cart_weights(self.model, query)
        return rf_weights(self.model, query)


def _params_label(params: Mapping) -> str:
    return ";".join(f"{k}={params[k]}" for k in sorted(params))


def _expand_grid(grid: Mapping[str, tuple]) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


# --------------------------------------------------------------------------
# Family drivers: solve + exact per-scenario scoring
# --------------------------------------------------------------------------


class _MultistageDriver:
    """Newsvendor / inventory / shipment: robust LP in, exact recourse out."""

    def __init__(self, problem, norm: str, support: str):
        self.problem = problem
        self.norm = norm
        self.support = support

    def solve(self, data: Dataset, w: WeightVector, eps: float):
        spec = UncertaintySpec(eps=eps, norm=self.norm, support=self.support)
        sol = solve_sro(self.problem, data, w, spec, drop_zero_weight=True)
        return (sol.policy.x0, sol.policy.x_mat), sol.objective

    def realized(self, decision, xi_row: np.ndarray) -> float:
        x0, x_mat = decision
        return evaluate_policy(self.problem, x0, x_mat, xi_row)

    def aggregate(self, costs: np.ndarray) -> float:
        return float(np.mean(costs))


class _PortfolioDriver:
    """Mean--cVaR portfolio; realized per-scenario value is the loss -x.xi."""

    def __init__(self, problem: PortfolioProblem, norm: str):
        self.problem = problem
        self.norm = norm

    def solve(self, data: Dataset, w: WeightVector, eps: float):
        sol = solve_cvar_portfolio(self.problem, data, w, eps, norm=self.norm)
        return sol.x, sol.value

    def realized(self, decision, xi_row: np.ndarray) -> float:
        return float(-np.dot(decision, xi_row))

    def aggregate(self, losses: np.ndarray) -> float:
        return empirical_mean_cvar_of_losses(
            losses, alpha=self.problem.alpha, lam=self.problem.lam
        )


def empirical_mean_cvar_of_losses(
    losses: np.ndarray, alpha: float, lam: float
) -> float:
    """lam * mean(loss) + exact empirical cVaR_alpha of the loss sample.

    The cVaR minimization over its auxiliary scalar is solved exactly by
    sorting: with ``m = floor(alpha n)`` the value is the average of the
    ``m`` largest losses plus the fractional tail at the next order
    statistic.  Equals the LP optimum of the usual epigraph form.
    """
    z = np.sort(np.asarray(losses, dtype=float))[::-1]
    n = z.size
    if n == 0:
        raise InvalidParameter("empty loss sample")
    an = alpha * n
    m = int(np.floor(an))
    if m >= n:
        cvar = float(np.mean(z))
    else:
        cvar = (float(np.sum(z[:m])) + (an - m) * z[m]) / an
    return lam * float(np.mean(z)) + cvar


def empirical_mean_cvar(
    x: np.ndarray, returns: np.ndarray, alpha: float, lam: float
) -> float:
    """Realized mean--cVaR objective of allocation ``x`` on a return sample."""
    return empirical_mean_cvar_of_losses(
        -np.asarray(returns, dtype=float) @ np.asarray(x, dtype=float),
        alpha=alpha,
        lam=lam,
    )


def _make_driver(config: ExperimentConfig):
    fam = _FAMILY_TYPES[config.generator]()
    if config.generator == "portfolio":
        prob = PortfolioProblem(n=fam.d_xi, alpha=config.alpha, lam=config.lam)
        return fam, _PortfolioDriver(prob, config.norm)
    problem = {
        "newsvendor": generators.newsvendor_problem,
        "inventory": generators.inventory_problem,
        "shipment": generators.shipment_problem,
    }[config.generator]()
    return fam, _MultistageDriver(problem, config.norm, config.support)


# --------------------------------------------------------------------------
# The comparison run
# --------------------------------------------------------------------------


def _combos_for(config: ExperimentConfig, method: str) -> list[tuple[float, dict]]:
    robust, flavor = _method_parts(method)
    radii = list(config.eps_grid) if robust else [0.0]
    if flavor is None:
        return [(e, {}) for e in radii]
    return [(e, p) for e in radii for p in _expand_grid(config.weight_grid[flavor])]


def _run_method(method, config, driver, train, query, test_xis, model_seed):
    """Tune on the validation split, refit on all of ``train``, score."""
    robust, flavor = _method_parts(method)
    combos = _combos_for(config, method)

    n = train.n
    n_val = int(round(config.val_fraction * n))
    tune = len(combos) > 1 and n_val >= 1 and n - n_val >= 2
    if tune:
        fit = Dataset(
            gammas=train.gammas[: n - n_val],
            xis=train.xis[: n - n_val],
            stage_dims=train.stage_dims,
        )
        val_g = train.gammas[n - n_val:]
        val_xi = train.xis[n - n_val:]
        scores = []
        for eps, params in combos:
            engine = _WeightEngine(flavor, params, fit, model_seed)
            if flavor is None:
                decision, _ = driver.solve(fit, engine.at(query), eps)
                vals = [driver.realized(decision, xi) for xi in val_xi]
            else:
                vals = []
                for g, xi in zip(val_g, val_xi):
                    decision, _ = driver.solve(fit, engine.at(g), eps)
                    vals.append(driver.realized(decision, xi))
            scores.append(driver.aggregate(np.asarray(vals)))
        eps, params = combos[int(np.argmin(scores))]
    else:
        eps, params = combos[0]

    t0 = time.perf_counter()
    engine = _WeightEngine(flavor, params, train, model_seed)
    decision, _ = driver.solve(train, engine.at(query), eps)
    solve_s = time.perf_counter() - t0
    costs = np.asarray([driver.realized(decision, xi) for xi in test_xis])
    return eps, _params_label(params), float(driver.aggregate(costs)), solve_s


def run_experiment(
    config: ExperimentConfig, out_path=None
) -> list[ResultRow]:
    """All (N, rep, method) rows; optionally also emitted as CSV.

    Deterministic: every replication's randomness comes from
    ``SeedSequence([seed, N, rep])``, so identical configs give identical
    rows and methods within a replication share train/query/test draws.
    A row whose pipeline raises a library error is recorded with that
    error's class name in ``status`` and NaN cost rather than dropped.
    """
    fam, driver = _make_driver(config)
    rows: list[ResultRow] = []
    for n in config.n_grid:
        for rep in range(config.reps):
            root = np.random.SeedSequence([config.seed, n, rep])
            s_train, s_query, s_test, s_model = root.spawn(4)
            train = fam.sample(n, s_train)
            query = fam.draw_query(s_query)
            test_xis = fam.sample_conditional(query, config.n_test, s_test)
            model_seed = int(s_model.generate_state(1)[0] % (2**31))
            for method in config.methods:
                try:
                    eps, label, cost, solve_s = _run_method(
                        method, config, driver, train, query, test_xis, model_seed
                    )
                    rows.append(
                        ResultRow(method, n, eps, label, rep, cost, solve_s, "ok")
                    )
                except SrosiError as exc:
                    rows.append(
                        ResultRow(
                            method, n, float("nan"), "", rep,
                            float("nan"), 0.0, type(exc).__name__,
                        )
                    )
    if out_path is not None:
        emit_csv(rows, out_path)
    return rows


# --------------------------------------------------------------------------
# Theorem-scale studies on the newsvendor family
# --------------------------------------------------------------------------

_CONC_HEADER = ["N", "rep", "d1", "eps_n"]
_CONV_HEADER = ["N", "rep", "v_hat", "v_star"]


@dataclass(frozen=True)
class ConcentrationRow:
    n: int
    rep: int
    d1: float
    eps_n: float


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    rep: int
    v_hat: float
    v_star: float


def run_concentration(
    n_grid: Sequence[int],
    reps: int,
    schedule: ScheduleParams,
    seed: int = 0,
    out_path=None,
) -> list[ConcentrationRow]:
    """Transport distance of the weighted empirical conditional to truth.

    Newsvendor data at the fixed query 0.5: the true conditional law is
    U[0.5, 1.5], so the distance is the exact 1-d CDF integral against the
    scheduled-kNN weighted empirical measure.  Emits one row per (N, rep)
    with the schedule's ball radius alongside.
    """
    query = np.array([0.5])
    fam = generators.NewsvendorFamily()
    rows = []
    for n in n_grid:
        k_n, eps_n = default_schedules(int(n), 1, 1, schedule)
        for rep in range(int(reps)):
            root = np.random.SeedSequence([seed, int(n), rep])
            data = fam.sample(int(n), root)
            w = knn_weights(data, query, int(k_n))
            mu = empirical_conditional(data, w)
            d1 = wasserstein1_1d_vs_uniform(mu, 0.5, 1.5)
            rows.append(ConcentrationRow(int(n), rep, float(d1), float(eps_n)))
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(_CONC_HEADER)
            for r in rows:
                out.writerow([r.n, r.rep, repr(r.d1), repr(r.eps_n)])
    return rows


def run_convergence(
    n_grid: Sequence[int],
    reps: int,
    schedule: ScheduleParams,
    seed: int = 0,
    out_path=None,
) -> list[ConvergenceRow]:
    """Scheduled newsvendor solve value against the closed-form optimum.

    Full pipeline at query 0.5: scheduled kNN weights and ball radius, the
    robust order-quantity solve, and the oracle value 1/4.
    """
    query = np.array([0.5])
    fam = generators.NewsvendorFamily()
    problem = generators.newsvendor_problem()
    rows = []
    for n in n_grid:
        k_n, eps_n = default_schedules(int(n), 1, 1, schedule)
        spec = UncertaintySpec(eps=eps_n, norm="linf", support="orthant")
        for rep in range(int(reps)):
            root = np.random.SeedSequence([seed, int(n), rep])
            data = fam.sample(int(n), root)
            w = knn_weights(data, query, int(k_n))
            sol = solve_sro(problem, data, w, spec, drop_zero_weight=True)
            rows.append(
                ConvergenceRow(
                    int(n), rep, float(sol.objective), float(fam.v_star(query))
                )
            )
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(_CONV_HEADER)
            for r in rows:
                out.writerow([r.n, r.rep, repr(r.v_hat), repr(r.v_star)])
    return rows
