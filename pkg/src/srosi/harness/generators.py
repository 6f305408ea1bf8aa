"""Synthetic problem families: covariates, outcome laws, and stage models.

Each family couples a feature vector ``gamma`` (observed before any
decision) to an outcome path ``xi`` through a smooth map plus noise, so
the conditional law of ``xi`` given ``gamma`` is Lipschitz in ``gamma``
and has bounded (or Gaussian) tails — the regularity the weighting
theory needs.  Families expose both joint sampling (training data) and
conditional sampling at a fixed query (out-of-sample evaluation), all
deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from srosi.errors import InvalidParameter
from srosi.multistage import DynamicProblem
from srosi.weights import Dataset

__all__ = [
    "NewsvendorFamily",
    "InventoryFamily",
    "PortfolioFamily",
    "ShipmentFamily",
    "gen_newsvendor",
    "gen_inventory",
    "gen_portfolio",
    "gen_shipment",
    "newsvendor_problem",
    "inventory_problem",
    "shipment_problem",
    "family_by_name",
]


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# --------------------------------------------------------------------------
# Newsvendor: 1-d feature, 1-d demand, closed-form oracle
# --------------------------------------------------------------------------


def newsvendor_problem(hold: float = 1.0, back: float = 1.0, order_cost: float = 0.0) -> DynamicProblem:
    """Single-period newsvendor: order x, then pay hold/backorder on x - demand."""
    return DynamicProblem(
        f=[order_cost],
        g=[0.0],
        h=[1.0],
        a=np.array([[hold], [-back]]),
        b=np.array([[-hold], [back]]),
        c=np.array([[-1.0], [-1.0]]),
        d=np.zeros(2),
        x_dims=(1,),
        xi_dims=(1,),
        y_dims=(1,),
        row_dims=(2,),
        x_nonneg=[True],
    )


@dataclass(frozen=True)
class NewsvendorFamily:
    """gamma ~ U[0,1], demand = gamma + U[0,1].

    The conditional law is U[gamma, gamma+1]: a pure shift, so the
    conditional transport distance between two queries is exactly their
    feature distance (Lipschitz constant 1), and for hold = back = 1 the
    optimal order is gamma + 1/2 with expected cost exactly 1/4.
    """

    d_gamma: int = 1
    d_xi: int = 1

    def sample(self, n: int, seed) -> Dataset:
        rng = _rng(seed)
        gam = rng.uniform(0.0, 1.0, n)
        xi = gam + rng.uniform(0.0, 1.0, n)
        return Dataset(gammas=gam[:, None], xis=xi[:, None], stage_dims=(1,))

    def draw_query(self, seed) -> np.ndarray:
        return _rng(seed).uniform(0.0, 1.0, 1)

    def sample_conditional(self, gamma, n: int, seed) -> np.ndarray:
        g = float(np.asarray(gamma).ravel()[0])
        return (g + _rng(seed).uniform(0.0, 1.0, n))[:, None]

    @staticmethod
    def v_star(gamma) -> float:
        return 0.25

    @staticmethod
    def x_star(gamma) -> float:
        return float(np.asarray(gamma).ravel()[0]) + 0.5

    @staticmethod
    def expected_cost(x: float, gamma) -> float:
        """E |x - U[g, g+1]| in closed form (hold = back = 1)."""
        g = float(np.asarray(gamma).ravel()[0])
        if x <= g:
            return g + 0.5 - x
        if x >= g + 1.0:
            return x - g - 0.5
        return 0.5 * ((x - g) ** 2 + (g + 1.0 - x) ** 2)


class NewsvendorResult(NamedTuple):
    data: Dataset
    problem: DynamicProblem
    oracle: NewsvendorFamily


def gen_newsvendor(n: int, seed) -> NewsvendorResult:
    if n < 1:
        raise InvalidParameter("need at least one sample")
    fam = NewsvendorFamily()
    return NewsvendorResult(fam.sample(n, seed), newsvendor_problem(), fam)


# --------------------------------------------------------------------------
# Seasonal demand core shared by the inventory and shipment families
# --------------------------------------------------------------------------


def _seasonal_demand(gam: np.ndarray, z: np.ndarray, periods: np.ndarray) -> np.ndarray:
    """max(0, 100 + 30 sin(2 pi t/12) + 40 tanh(g1 + g2 t/12) + 10 z_t).

    ``gam`` is (n, 3) — the third feature is deliberately irrelevant, so
    tree/forest weights have something to learn; ``periods`` are 1-based.
    """
    t = periods[None, :] / 12.0
    level = 100.0 + 30.0 * np.sin(2.0 * np.pi * t)
    signal = 40.0 * np.tanh(gam[:, :1] + gam[:, 1:2] * t)
    return np.maximum(0.0, level + signal + 10.0 * z)


# --------------------------------------------------------------------------
# Inventory: 12 periods, two suppliers (lead times 0 and 1)
# --------------------------------------------------------------------------

_INV_T = 12
_INV_ORDER_COSTS = (1.0, 0.5)  # same-period supplier, next-period supplier
_INV_HOLD = 0.25
_INV_BACK = 11.0


def inventory_problem() -> DynamicProblem:
    """12-period procurement: per period order from a same-period supplier
    (cost 1.0) and a one-period-lead supplier (cost 0.5); inventory starts
    empty; per period one epigraph variable carries max(hold, backorder)
    cost via two rows."""
    t_n = _INV_T
    d_x, d_y, m = 2 * t_n, t_n, 2 * t_n
    a = np.zeros((m, d_x))
    b = np.zeros((m, t_n))
    c = np.zeros((m, d_y))
    for t in range(t_n):  # period t (0-based); rows 2t, 2t+1
        recv = np.zeros(d_x)
        recv[0 : 2 * t + 1 : 2] = 1.0  # same-period orders s <= t
        if t >= 1:
            recv[1 : 2 * t : 2] = 1.0  # lead-1 orders s <= t-1
        a[2 * t] = _INV_HOLD * recv
        a[2 * t + 1] = -_INV_BACK * recv
        b[2 * t, : t + 1] = -_INV_HOLD
        b[2 * t + 1, : t + 1] = _INV_BACK
        c[2 * t, t] = -1.0
        c[2 * t + 1, t] = -1.0
    return DynamicProblem(
        f=np.tile(_INV_ORDER_COSTS, t_n),
        g=np.zeros(t_n),
        h=np.ones(d_y),
        a=a,
        b=b,
        c=c,
        d=np.zeros(m),
        x_dims=(2,) * t_n,
        xi_dims=(1,) * t_n,
        y_dims=(1,) * t_n,
        row_dims=(2,) * t_n,
        x_nonneg=np.ones(d_x, dtype=bool),
    )


@dataclass(frozen=True)
class InventoryFamily:
    """gamma ~ N(0, I_3); 12 monthly demands from the seasonal core."""

    d_gamma: int = 3
    d_xi: int = _INV_T

    def sample(self, n: int, seed) -> Dataset:
        rng = _rng(seed)
        gam = rng.standard_normal((n, 3))
        z = rng.standard_normal((n, _INV_T))
        xis = _seasonal_demand(gam, z, np.arange(1, _INV_T + 1))
        return Dataset(gammas=gam, xis=xis, stage_dims=(1,) * _INV_T)

    def draw_query(self, seed) -> np.ndarray:
        return _rng(seed).standard_normal(3)

    def sample_conditional(self, gamma, n: int, seed) -> np.ndarray:
        gam = np.tile(np.asarray(gamma, dtype=float).ravel(), (n, 1))
        z = _rng(seed).standard_normal((n, _INV_T))
        return _seasonal_demand(gam, z, np.arange(1, _INV_T + 1))


class InventoryResult(NamedTuple):
    data: Dataset
    problem: DynamicProblem
    family: InventoryFamily


def gen_inventory(n: int, seed) -> InventoryResult:
    if n < 1:
        raise InvalidParameter("need at least one sample")
    fam = InventoryFamily()
    return InventoryResult(fam.sample(n, seed), inventory_problem(), fam)


# --------------------------------------------------------------------------
# Portfolio: 10 assets, 3 factors
# --------------------------------------------------------------------------

# Fixed factor-loading matrix: three pure plays, three balanced pairs,
# three long/short mixes, one diversified row.
_PORT_W = np.array(
    [
        [0.8, 0.0, 0.0],
        [0.0, 0.8, 0.0],
        [0.0, 0.0, 0.8],
        [0.4, 0.4, 0.0],
        [0.0, 0.4, 0.4],
        [0.4, 0.0, 0.4],
        [0.6, -0.3, 0.0],
        [0.0, 0.6, -0.3],
        [-0.3, 0.0, 0.6],
        [0.2, 0.2, 0.2],
    ]
)
_PORT_N = 10
_PORT_CORR = 0.2
_PORT_VOL = 0.02


def _port_noise_root() -> np.ndarray:
    cov = _PORT_VOL**2 * (
        (1.0 - _PORT_CORR) * np.eye(_PORT_N) + _PORT_CORR * np.ones((_PORT_N, _PORT_N))
    )
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


_PORT_ROOT = _port_noise_root()


@dataclass(frozen=True)
class PortfolioFamily:
    """gamma ~ N(0, I_3); returns = 0.03 tanh(W gamma) + S^(1/2) z.

    Noise covariance S has per-asset variance 0.02^2 and pairwise
    correlation 0.2; the symmetric square root is fixed at import time.
    """

    d_gamma: int = 3
    d_xi: int = _PORT_N

    def sample(self, n: int, seed) -> Dataset:
        rng = _rng(seed)
        gam = rng.standard_normal((n, 3))
        xis = self.conditional_mean(gam) + rng.standard_normal((n, _PORT_N)) @ _PORT_ROOT.T
        return Dataset(gammas=gam, xis=xis, stage_dims=(_PORT_N,))

    def draw_query(self, seed) -> np.ndarray:
        return _rng(seed).standard_normal(3)

    def sample_conditional(self, gamma, n: int, seed) -> np.ndarray:
        gam = np.tile(np.asarray(gamma, dtype=float).ravel(), (n, 1))
        return self.conditional_mean(gam) + _rng(seed).standard_normal((n, _PORT_N)) @ _PORT_ROOT.T

    @staticmethod
    def conditional_mean(gam: np.ndarray) -> np.ndarray:
        return 0.03 * np.tanh(np.atleast_2d(gam) @ _PORT_W.T)

    @staticmethod
    def noise_root() -> np.ndarray:
        return _PORT_ROOT.copy()


class PortfolioResult(NamedTuple):
    data: Dataset
    family: PortfolioFamily


def gen_portfolio(n: int, seed) -> PortfolioResult:
    if n < 1:
        raise InvalidParameter("need at least one sample")
    fam = PortfolioFamily()
    return PortfolioResult(fam.sample(n, seed), fam)


# --------------------------------------------------------------------------
# Shipment: 4 facilities on a 12-location ring, produce-then-ship
# --------------------------------------------------------------------------

_SHIP_F = 4
_SHIP_L = 12
_SHIP_P1 = 5.0  # pre-demand production cost
_SHIP_P2 = 100.0  # post-demand production cost
_SHIP_R = 90.0  # revenue per unit of demand


def shipment_cost_matrix() -> np.ndarray:
    """c[f, l] = 1 + 0.3 * ring_distance(3(f+1), l+1) on a 12-cycle."""
    c = np.zeros((_SHIP_F, _SHIP_L))
    for f in range(_SHIP_F):
        for loc in range(_SHIP_L):
            raw = abs(3 * (f + 1) - (loc + 1)) % _SHIP_L
            c[f, loc] = 1.0 + 0.3 * min(raw, _SHIP_L - raw)
    return c


def shipment_problem() -> DynamicProblem:
    """Produce x_f before demand; after demand, produce y_f at premium and
    ship s_{fl}.  Rows: per-location demand satisfaction, per-facility
    shipping capacity, and explicit nonnegativity of the recourse (rule
    values must stay nonnegative over whole uncertainty balls, so these
    are constraint rows, not variable bounds).  Revenue enters as the
    policy-independent term -r * sum(demand)."""
    n_f, n_l = _SHIP_F, _SHIP_L
    d_y = n_f + n_f * n_l
    m = n_l + n_f + d_y
    a = np.zeros((m, n_f))
    b = np.zeros((m, n_l))
    c = np.zeros((m, d_y))
    def s_col(f, loc):
        return n_f + f * n_l + loc

    for loc in range(n_l):  # demand: xi_l - sum_f s_{fl} <= 0
        b[loc, loc] = 1.0
        for f in range(n_f):
            c[loc, s_col(f, loc)] = -1.0
    for f in range(n_f):  # capacity: sum_l s_{fl} - x_f - y_f <= 0
        r = n_l + f
        a[r, f] = -1.0
        c[r, f] = -1.0
        c[r, s_col(f, 0) : s_col(f, 0) + n_l] = 1.0
    for j in range(d_y):  # recourse nonnegativity: -y_j <= 0
        c[n_l + n_f + j, j] = -1.0
    return DynamicProblem(
        f=np.full(n_f, _SHIP_P1),
        g=np.full(n_l, -_SHIP_R),
        h=np.concatenate([np.full(n_f, _SHIP_P2), shipment_cost_matrix().ravel()]),
        a=a,
        b=b,
        c=c,
        d=np.zeros(m),
        x_dims=(n_f,),
        xi_dims=(n_l,),
        y_dims=(d_y,),
        row_dims=(m,),
        x_nonneg=np.ones(n_f, dtype=bool),
    )


@dataclass(frozen=True)
class ShipmentFamily:
    """gamma ~ N(0, I_3); 12 location demands from the seasonal core with
    location index as the phase."""

    d_gamma: int = 3
    d_xi: int = _SHIP_L

    def sample(self, n: int, seed) -> Dataset:
        rng = _rng(seed)
        gam = rng.standard_normal((n, 3))
        z = rng.standard_normal((n, _SHIP_L))
        xis = _seasonal_demand(gam, z, np.arange(1, _SHIP_L + 1))
        return Dataset(gammas=gam, xis=xis, stage_dims=(_SHIP_L,))

    def draw_query(self, seed) -> np.ndarray:
        return _rng(seed).standard_normal(3)

    def sample_conditional(self, gamma, n: int, seed) -> np.ndarray:
        gam = np.tile(np.asarray(gamma, dtype=float).ravel(), (n, 1))
        z = _rng(seed).standard_normal((n, _SHIP_L))
        return _seasonal_demand(gam, z, np.arange(1, _SHIP_L + 1))


class ShipmentResult(NamedTuple):
    data: Dataset
    problem: DynamicProblem
    family: ShipmentFamily


def gen_shipment(n: int, seed) -> ShipmentResult:
    if n < 1:
        raise InvalidParameter("need at least one sample")
    fam = ShipmentFamily()
    return ShipmentResult(fam.sample(n, seed), shipment_problem(), fam)


_FAMILIES = {
    "newsvendor": gen_newsvendor,
    "inventory": gen_inventory,
    "portfolio": gen_portfolio,
    "shipment": gen_shipment,
}


def family_by_name(name: str):
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise InvalidParameter(
            f"unknown generator {name!r}; choose from {sorted(_FAMILIES)}"
        ) from None
