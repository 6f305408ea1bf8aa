"""Sample-robust decision making with covariate information.

The package bundles the pieces needed to go from a covariate/outcome sample
to a robust multi-period decision and an honest out-of-sample evaluation:

``weights``
    Nonparametric scenario-weight estimators (k-nearest-neighbor, kernel,
    regression tree, random forest) plus the radius/bandwidth schedules that
    make the weighted robust objective statistically consistent.
``transport``
    Discrete measures, order-1 Wasserstein distances, and worst-case
    expectations over Wasserstein balls on a fixed finite support.
``lp``
    Self-contained linear-programming backends (bounded-variable revised
    simplex; block-structured interior point) with primal/dual certificates.
``multistage``
    Multi-period problems with linear decision rules, the per-sample-policy
    robust counterpart as one LP, and exact policy evaluation.
``portfolio``
    Single-period mean-CVaR portfolio selection over weighted Wasserstein
    ambiguity sets.
``harness``
    Synthetic problem generators, experiment drivers, and the ``srosi`` CLI.
"""

from srosi import errors, lp, multistage, portfolio, transport, weights

__all__ = ["errors", "lp", "multistage", "portfolio", "transport", "weights"]

__version__ = "0.1.0"
