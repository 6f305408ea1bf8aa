"""Scenario-weight estimators over covariate/outcome samples.

Given historical pairs ``(gamma_i, xi_i)`` and a query covariate, each
estimator returns a probability vector over the samples: k-nearest-neighbor,
kernel regression (Gaussian / triangular / Epanechnikov), a regression tree
grown on the multi-output response, and a random forest that averages
per-tree leaf weights over bootstrap draws.  ``default_schedules`` supplies
the sample-size-dependent neighbor counts / bandwidths and ball radii that
keep the downstream weighted robust objective statistically consistent.

Determinism notes, since the test suite leans on them: kNN breaks distance
ties by smallest sample index; the tree picks the lowest feature index and
then the lowest threshold among equally good splits; forests are fully
reproducible from their seed.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from srosi.errors import InvalidParameter, NoMass

__all__ = [
    "Dataset",
    "WeightVector",
    "KernelKind",
    "TreeLeaf",
    "TreeNode",
    "TreeModel",
    "ForestModel",
    "ScheduleParams",
    "knn_weights",
    "kernel_weights",
    "fit_cart",
    "cart_weights",
    "fit_forest",
    "rf_weights",
    "default_schedules",
    "read_dataset_csv",
    "write_dataset_csv",
    "forest_to_json",
    "forest_from_json",
]


@dataclass(frozen=True)
class Dataset:
    """Historical sample: covariates ``gammas``, outcome paths ``xis``.

    ``stage_dims`` partitions each outcome row into per-period components;
    single-period data uses ``(d_xi,)``.
    """

    gammas: np.ndarray
    xis: np.ndarray
    stage_dims: tuple[int, ...]

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gammas, dtype=float))
        x = np.atleast_2d(np.asarray(self.xis, dtype=float))
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "xis", x)
        object.__setattr__(self, "stage_dims", tuple(int(t) for t in self.stage_dims))
        if g.shape[0] != x.shape[0]:
            raise InvalidParameter(
                f"gammas has {g.shape[0]} rows but xis has {x.shape[0]}"
            )
        if g.shape[0] < 1:
            raise InvalidParameter("dataset needs at least one sample")
        if not (np.isfinite(g).all() and np.isfinite(x).all()):
            raise InvalidParameter("dataset rows must be finite")
        if any(t < 1 for t in self.stage_dims):
            raise InvalidParameter("stage_dims entries must be positive")
        if sum(self.stage_dims) != x.shape[1]:
            raise InvalidParameter(
                f"stage_dims sums to {sum(self.stage_dims)}, expected {x.shape[1]}"
            )

    @property
    def n(self) -> int:
        return self.gammas.shape[0]

    @property
    def d_gamma(self) -> int:
        return self.gammas.shape[1]

    @property
    def d_xi(self) -> int:
        return self.xis.shape[1]

    @property
    def n_stages(self) -> int:
        return len(self.stage_dims)

    def stage_slices(self) -> list[slice]:
        """Column slices of ``xis`` belonging to each period, in order."""
        out, start = [], 0
        for t in self.stage_dims:
            out.append(slice(start, start + t))
            start += t
        return out


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights over the samples, summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        object.__setattr__(self, "w", w)
        if w.size < 1:
            raise InvalidParameter("weight vector must be nonempty")
        if np.any(w < 0):
            raise InvalidParameter(f"negative weight at index {int(np.argmin(w))}")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameter(f"weights sum to {total!r}, expected 1")

    def __len__(self) -> int:
        return self.w.size

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)


class KernelKind(enum.Enum):
    GAUSSIAN = "gaussian"
    TRIANGULAR = "triangular"
    EPANECHNIKOV = "epanechnikov"


def _kernel_values(kind: KernelKind, u: np.ndarray) -> np.ndarray:
    if kind is KernelKind.GAUSSIAN:
        # u**2 may overflow for degenerate bandwidths; exp(-inf) = 0 is
        # exactly the wanted limit, so the overflow is not an error here.
        with np.errstate(over="ignore"):
            return np.exp(-0.5 * u**2) / math.sqrt(2.0 * math.pi)
    if kind is KernelKind.TRIANGULAR:
        return np.where(u <= 1.0, 1.0 - u, 0.0)
    if kind is KernelKind.EPANECHNIKOV:
        return np.where(u <= 1.0, 0.75 * (1.0 - u**2), 0.0)
    raise InvalidParameter(f"unknown kernel {kind!r}")  # pragma: no cover


def knn_weights(data: Dataset, query: np.ndarray, k: int) -> WeightVector:
    """Uniform weights on the ``k`` nearest samples in covariate space.

    Distances are Euclidean; ties at the k-th distance go to the smaller
    sample index so exactly ``k`` samples carry weight.
    """
    k = int(k)
    if not 1 <= k <= data.n:
        raise InvalidParameter(f"k={k} outside [1, {data.n}]")
    q = np.asarray(query, dtype=float).ravel()
    dist = np.linalg.norm(data.gammas - q[None, :], axis=1)
    chosen = np.lexsort((np.arange(data.n), dist))[:k]
    w = np.zeros(data.n)
    w[chosen] = 1.0 / k
    return WeightVector(w)


def kernel_weights(
    data: Dataset, query: np.ndarray, h: float, kernel: KernelKind
) -> WeightVector:
    """Normalized kernel weights ``K(dist/h) / sum_j K(dist_j/h)``."""
    if not h > 0:
        raise InvalidParameter(f"bandwidth h={h} must be positive")
    q = np.asarray(query, dtype=float).ravel()
    u = np.linalg.norm(data.gammas - q[None, :], axis=1) / h
    vals = _kernel_values(kernel, u)
    total = float(vals.sum())
    if total <= 0.0:
        raise NoMass(
            f"all {kernel.value} kernel values vanish at bandwidth {h}; "
            "no sample carries mass"
        )
    return WeightVector(vals / total)


# --------------------------------------------------------------------------
# Regression tree / random forest
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeLeaf:
    indices: np.ndarray  # training row indices, with bootstrap multiplicity


@dataclass(frozen=True)
class TreeNode:
    feature: int
    threshold: float
    left: "TreeNode | TreeLeaf"
    right: "TreeNode | TreeLeaf"


@dataclass(frozen=True)
class TreeModel:
    root: "TreeNode | TreeLeaf"
    n_train: int
    min_leaf: int

    def __post_init__(self):
        seen: list[np.ndarray] = []

        def collect(node):
            if isinstance(node, TreeLeaf):
                if node.indices.size < self.min_leaf:
                    raise InvalidParameter(
                        f"leaf of size {node.indices.size} below min_leaf"
                    )
                seen.append(node.indices)
            else:
                collect(node.left)
                collect(node.right)

        collect(self.root)
        # No training row may occur in two different leaves (bootstrap
        # repeats of a row land in one leaf since routing is by value).
        distinct = [np.unique(leaf) for leaf in seen]
        if np.unique(np.concatenate(distinct)).size != sum(d.size for d in distinct):
            raise InvalidParameter("a training row appears in multiple leaves")

    def leaf_for(self, query: np.ndarray) -> TreeLeaf:
        q = np.asarray(query, dtype=float).ravel()
        node = self.root
        while isinstance(node, TreeNode):
            node = node.left if q[node.feature] <= node.threshold else node.right
        return node


def _grow(gam, xi, rows, min_leaf, max_depth, depth, mtry, rng):
    """Recursive splitter; ``rows`` are positions into the training arrays."""
    n = rows.size
    if n < 2 * min_leaf or depth >= max_depth:
        return TreeLeaf(indices=rows)
    y = xi[rows]
    mean = y.mean(axis=0)
    base = float(((y - mean) ** 2).sum())
    if base <= 1e-12 * (1.0 + float((y**2).sum())):
        return TreeLeaf(indices=rows)

    d_gamma = gam.shape[1]
    if mtry is None or mtry >= d_gamma:
        feats = np.arange(d_gamma)
    else:
        feats = np.sort(rng.choice(d_gamma, size=mtry, replace=False))

    best_sse = np.inf
    best_feat = -1
    best_thr = 0.0
    for f in feats:
        order = np.argsort(gam[rows, f], kind="stable")
        gs = gam[rows[order], f]
        ys = y[order]
        csum = np.cumsum(ys, axis=0)
        csq = np.cumsum((ys**2).sum(axis=1))
        ks = np.arange(1, n)
        valid = (gs[1:] != gs[:-1]) & (ks >= min_leaf) & (n - ks >= min_leaf)
        if not valid.any():
            continue
        left = csq[:-1] - (csum[:-1] ** 2).sum(axis=1) / ks
        right = (csq[-1] - csq[:-1]) - ((csum[-1] - csum[:-1]) ** 2).sum(axis=1) / (
            n - ks
        )
        sse = np.where(valid, left + right, np.inf)
        j = int(np.argmin(sse))
        if sse[j] < best_sse - 1e-12:
            best_sse = float(sse[j])
            best_feat = int(f)
            best_thr = 0.5 * (gs[j] + gs[j + 1])

    if best_feat < 0 or best_sse >= base - 1e-12 * (1.0 + base):
        return TreeLeaf(indices=rows)
    go_left = gam[rows, best_feat] <= best_thr
    return TreeNode(
        feature=best_feat,
        threshold=float(best_thr),
        left=_grow(gam, xi, rows[go_left], min_leaf, max_depth, depth + 1, mtry, rng),
        right=_grow(gam, xi, rows[~go_left], min_leaf, max_depth, depth + 1, mtry, rng),
    )


def fit_cart(data: Dataset, min_leaf: int = 5, max_depth: int = 16) -> TreeModel:
    """Grow a greedy multi-output regression tree on (gamma -> xi).

    Split quality is the total squared deviation of the outcome rows from
    their side means, summed over all outcome coordinates; candidate
    thresholds are midpoints between consecutive distinct sorted covariate
    values.  Degenerate data yields a single root leaf.
    """
    if min_leaf < 1:
        raise InvalidParameter("min_leaf must be >= 1")
    if max_depth < 1:
        raise InvalidParameter("max_depth must be >= 1")
    root = _grow(
        data.gammas,
        data.xis,
        np.arange(data.n),
        int(min_leaf),
        int(max_depth),
        0,
        None,
        None,
    )
    return TreeModel(root=root, n_train=data.n, min_leaf=int(min_leaf))


def cart_weights(tree: TreeModel, query: np.ndarray) -> WeightVector:
    """Uniform weights over the training rows sharing the query's leaf."""
    leaf = tree.leaf_for(query)
    w = np.zeros(tree.n_train)
    np.add.at(w, leaf.indices, 1.0 / leaf.indices.size)
    return WeightVector(w)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeModel, ...]
    bootstraps: tuple[np.ndarray, ...]  # per-tree draw of original row indices
    seed: int
    n_train: int

    def __post_init__(self):
        if len(self.trees) < 1:
            raise InvalidParameter("forest needs at least one tree")
        if len(self.trees) != len(self.bootstraps):
            raise InvalidParameter("one bootstrap list per tree required")

    @property
    def b(self) -> int:
        return len(self.trees)


def fit_forest(
    data: Dataset,
    b_trees: int = 100,
    min_leaf: int = 5,
    max_depth: int = 16,
    mtry: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """Fit ``b_trees`` regression trees on bootstrap resamples.

    Each split considers a fresh uniformly drawn subset of ``mtry``
    covariate features (default ``max(1, ceil(d_gamma/3))``).  With
    ``bootstrap=False`` every tree sees the full sample, so a one-tree
    forest reduces exactly to the plain tree.
    """
    if b_trees < 1:
        raise InvalidParameter("b_trees must be >= 1")
    if mtry is None:
        mtry = max(1, math.ceil(data.d_gamma / 3))
    if not 1 <= mtry <= data.d_gamma:
        raise InvalidParameter(f"mtry={mtry} outside [1, {data.d_gamma}]")
    rng = np.random.default_rng(seed)
    trees = []
    boots = []
    for _ in range(b_trees):
        if bootstrap:
            draw = np.sort(rng.integers(0, data.n, size=data.n))
        else:
            draw = np.arange(data.n)
        root = _grow(
            data.gammas[draw],
            data.xis[draw],
            np.arange(data.n),
            int(min_leaf),
            int(max_depth),
            0,
            int(mtry),
            rng,
        )
        # Positions within the bootstrap are translated back to original
        # row indices; repeats preserve multiplicity.
        root = _relabel(root, draw)
        trees.append(TreeModel(root=root, n_train=data.n, min_leaf=int(min_leaf)))
        boots.append(draw)
    return ForestModel(
        trees=tuple(trees), bootstraps=tuple(boots), seed=int(seed), n_train=data.n
    )


def _relabel(node, draw):
    if isinstance(node, TreeLeaf):
        return TreeLeaf(indices=draw[node.indices])
    return TreeNode(
        feature=node.feature,
        threshold=node.threshold,
        left=_relabel(node.left, draw),
        right=_relabel(node.right, draw),
    )


def rf_weights(forest: ForestModel, query: np.ndarray) -> WeightVector:
    """Average the per-tree leaf weights (bootstrap multiplicity counts)."""
    w = np.zeros(forest.n_train)
    for tree in forest.trees:
        leaf = tree.leaf_for(query)
        np.add.at(w, leaf.indices, 1.0 / (leaf.indices.size * forest.b))
    return WeightVector(w)


# --------------------------------------------------------------------------
# Consistency schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleParams:
    """Constants of the consistency schedules.

    ``method`` selects the estimator family: k-nearest-neighbor uses
    ``k3`` and an exponent ``delta`` in (1/2, 1); kernel regression uses
    ``k4`` and ``delta`` in (0, 1/(2 d_gamma)).  ``k1`` and ``p`` drive the
    ball radius ``k1 / N**p`` in both cases.  The dimension-dependent upper
    bounds on ``p`` are checked in :func:`default_schedules`, where the
    dimensions are known.
    """

    method: str
    k1: float
    p: float
    delta: float
    k3: float | None = None
    k4: float | None = None

    def __post_init__(self):
        if self.method not in ("knn", "kernel"):
            raise InvalidParameter(f"method {self.method!r} not in {{knn, kernel}}")
        if not self.k1 > 0:
            raise InvalidParameter("k1 must be positive")
        if not self.p > 0:
            raise InvalidParameter("p must be positive")
        if self.method == "knn":
            if self.k3 is None or not self.k3 > 0:
                raise InvalidParameter("knn schedule needs k3 > 0")
            if not 0.5 < self.delta < 1.0:
                raise InvalidParameter(
                    f"knn needs delta in (1/2, 1), got {self.delta}"
                )
        else:
            if self.k4 is None or not self.k4 > 0:
                raise InvalidParameter("kernel schedule needs k4 > 0")
            if not self.delta > 0:
                raise InvalidParameter("kernel needs delta > 0")


def default_schedules(
    n: int, d_gamma: int, d_xi: int, params: ScheduleParams
) -> tuple[float, float]:
    """Neighbor count / bandwidth plus ball radius for sample size ``n``.

    Returns ``(k_n, eps_n)`` for the kNN family (``k_n`` an integer-valued
    float) or ``(h_n, eps_n)`` for the kernel family, after checking the
    exponent inequalities that the consistency guarantee requires; a
    violated inequality is reported by name.
    """
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    if params.method == "knn":
        cap = (1.0 - params.delta) / d_gamma
        if params.p >= cap:
            raise InvalidParameter(
                f"knn radius exponent p={params.p} must be < (1-delta)/d_gamma "
                f"= {cap:.6g}"
            )
        cap2 = (2.0 * params.delta - 1.0) / (d_xi + 2.0)
        if params.p >= cap2:
            raise InvalidParameter(
                f"knn radius exponent p={params.p} must be < (2*delta-1)/(d_xi+2) "
                f"= {cap2:.6g}"
            )
        k_n = min(math.ceil(params.k3 * n**params.delta), n - 1) if n > 1 else 1
        return float(k_n), params.k1 / n**params.p
    cap = 1.0 / (2.0 * d_gamma)
    if params.delta >= cap:
        raise InvalidParameter(
            f"kernel bandwidth exponent delta={params.delta} must be < "
            f"1/(2*d_gamma) = {cap:.6g}"
        )
    if params.p >= params.delta:
        raise InvalidParameter(
            f"kernel radius exponent p={params.p} must be < delta = {params.delta}"
        )
    cap2 = (1.0 - params.delta * d_gamma) / (2.0 + d_xi)
    if params.p >= cap2:
        raise InvalidParameter(
            f"kernel radius exponent p={params.p} must be < "
            f"(1-delta*d_gamma)/(2+d_xi) = {cap2:.6g}"
        )
    return params.k4 * n ** (-params.delta), params.k1 / n**params.p


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------


def write_dataset_csv(path, data: Dataset) -> None:
    """Write ``g1..g{d_gamma},x1..x{d_xi}`` rows (stage_dims live in config)."""
    header = [f"g{j + 1}" for j in range(data.d_gamma)] + [
        f"x{j + 1}" for j in range(data.d_xi)
    ]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for g, x in zip(data.gammas, data.xis):
            out.writerow([repr(float(v)) for v in g] + [repr(float(v)) for v in x])


def read_dataset_csv(path, stage_dims) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidParameter(f"{path}: empty file")
    header = rows[0]
    d_gamma = sum(1 for name in header if name.startswith("g"))
    d_xi = sum(1 for name in header if name.startswith("x"))
    if d_gamma + d_xi != len(header) or d_gamma == 0 or d_xi == 0:
        raise InvalidParameter(
            f"{path}: header must be g1..g{{d_gamma}},x1..x{{d_xi}}, got {header}"
        )
    body = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    if body.ndim != 2 or body.shape[1] != len(header):
        raise InvalidParameter(f"{path}: ragged or empty data body")
    return Dataset(
        gammas=body[:, :d_gamma],
        xis=body[:, d_gamma:],
        stage_dims=tuple(stage_dims),
    )


_FOREST_FORMAT = "srosi-forest"
_FOREST_VERSION = 1


def _node_to_json(node):
    if isinstance(node, TreeLeaf):
        return {"leaf": [int(i) for i in node.indices]}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(doc):
    if "leaf" in doc:
        return TreeLeaf(indices=np.asarray(doc["leaf"], dtype=int))
    return TreeNode(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        left=_node_from_json(doc["left"]),
        right=_node_from_json(doc["right"]),
    )


def forest_to_json(forest: ForestModel) -> dict:
    """Versioned JSON-ready document.

    Schema v1: ``{format, version, seed, n_train, min_leaf, bootstraps:
    [[row, ...], ...], trees: [node, ...]}`` where a node is either
    ``{"leaf": [row, ...]}`` or ``{"feature", "threshold", "left",
    "right"}``.
    """
    return {
        "format": _FOREST_FORMAT,
        "version": _FOREST_VERSION,
        "seed": forest.seed,
        "n_train": forest.n_train,
        "min_leaf": forest.trees[0].min_leaf,
        "bootstraps": [[int(i) for i in b] for b in forest.bootstraps],
        "trees": [_node_to_json(t.root) for t in forest.trees],
    }


def forest_from_json(doc: dict) -> ForestModel:
    if doc.get("format") != _FOREST_FORMAT:
        raise InvalidParameter(f"not a forest document: {doc.get('format')!r}")
    if doc.get("version") != _FOREST_VERSION:
        raise InvalidParameter(f"unsupported forest version {doc.get('version')!r}")
    n_train = int(doc["n_train"])
    min_leaf = int(doc["min_leaf"])
    trees = tuple(
        TreeModel(root=_node_from_json(t), n_train=n_train, min_leaf=min_leaf)
        for t in doc["trees"]
    )
    boots = tuple(np.asarray(b, dtype=int) for b in doc["bootstraps"])
    return ForestModel(
        trees=trees, bootstraps=boots, seed=int(doc["seed"]), n_train=n_train
    )
