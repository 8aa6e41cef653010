"""Datasets, CSV ingestion, discretization and synthetic tree-model generators."""

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

DEFAULT_ENUMERATION_CAP = 10**6


class DataError(ValueError):
    """Raised for malformed input data or invalid dataset construction."""


class CSVParseError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """N samples x D features with discrete labels in ``[0, n_classes)``.

    ``cardinalities[i]`` is the number of categories of column ``i``, or
    ``None`` when the column is continuous.  ``weights`` are per-sample
    nonnegative reals; exact enumerated joints carry their probabilities here.
    ``label_values`` / ``category_values`` keep the original raw values so
    codes can be decoded (``None`` when the data was built from codes).
    """

    columns: tuple
    cardinalities: tuple
    labels: np.ndarray
    n_classes: int
    weights: np.ndarray = None
    feature_names: tuple = None
    label_values: Optional[tuple] = None
    category_values: Optional[tuple] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        n = labels.shape[0]
        if labels.ndim != 1:
            raise DataError("labels must be one-dimensional")
        if self.n_classes < 1:
            raise DataError("n_classes must be >= 1")
        if n and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DataError("label code outside [0, n_classes)")
        if len(self.columns) != len(self.cardinalities):
            raise DataError("one cardinality entry required per column")

        cols = []
        for i, (col, card) in enumerate(zip(self.columns, self.cardinalities)):
            if card is None:
                col = np.asarray(col, dtype=np.float64)
                if not np.all(np.isfinite(col)):
                    raise DataError(f"column {i} has non-finite values")
            else:
                col = np.asarray(col, dtype=np.int64)
                if card < 1:
                    raise DataError(f"column {i} has cardinality < 1")
                if col.size and (col.min() < 0 or col.max() >= card):
                    raise DataError(f"column {i} has a code outside [0, {card})")
            if col.shape != (n,):
                raise DataError(f"column {i} has {col.shape[0]} entries, expected {n}")
            cols.append(_frozen(col))

        if self.weights is None:
            weights = np.ones(n)
        else:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != (n,):
                raise DataError("weights must have one entry per sample")
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise DataError("weights must be finite and nonnegative")
        if n and weights.sum() <= 0:
            raise DataError("sum of weights must be positive")

        names = self.feature_names
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(len(cols)))
        elif len(names) != len(cols):
            raise DataError("one feature name required per column")

        object.__setattr__(self, "columns", tuple(cols))
        object.__setattr__(self, "cardinalities", tuple(self.cardinalities))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "feature_names", tuple(str(s) for s in names))

    @classmethod
    def from_codes(cls, X, y, n_classes=None, cardinalities=None, weights=None,
                   feature_names=None):
        """Build an all-categorical dataset from an integer code matrix."""
        X = np.asarray(X, dtype=np.int64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 1
        if cardinalities is None:
            cardinalities = [int(X[:, i].max()) + 1 if X.shape[0] else 1
                             for i in range(X.shape[1])]
        return cls(tuple(X[:, i] for i in range(X.shape[1])), tuple(cardinalities),
                   y, int(n_classes), weights, feature_names)

    @classmethod
    def from_continuous(cls, X, y, n_classes=None, weights=None, feature_names=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 1
        return cls(tuple(X[:, i] for i in range(X.shape[1])), (None,) * X.shape[1],
                   y, int(n_classes), weights, feature_names)

    @property
    def n_samples(self):
        return self.labels.shape[0]

    @property
    def n_features(self):
        return len(self.columns)

    def is_categorical(self, i):
        return self.cardinalities[i] is not None

    @property
    def all_categorical(self):
        return all(c is not None for c in self.cardinalities)

    def column_kind(self, i):
        return CATEGORICAL if self.is_categorical(i) else CONTINUOUS

    def feature_index(self, key):
        """Resolve a feature name or integer index to an index."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.n_features:
                raise DataError(f"feature index {key} out of range")
            return int(key)
        try:
            return self.feature_names.index(key)
        except ValueError:
            raise DataError(f"unknown feature {key!r}") from None

    def matrix(self, features=None):
        """Stack columns into an N x |features| array (int64 if all categorical)."""
        idx = range(self.n_features) if features is None else list(features)
        cols = [self.columns[i] for i in idx]
        if not cols:
            return np.zeros((self.n_samples, 0))
        if all(self.cardinalities[i] is not None for i in idx):
            return np.stack(cols, axis=1)
        return np.stack([c.astype(np.float64) for c in cols], axis=1)

    def subset(self, rows):
        """Row-restricted view (used for cross-validation folds)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(tuple(c[rows] for c in self.columns), self.cardinalities,
                       self.labels[rows], self.n_classes, self.weights[rows],
                       self.feature_names, self.label_values, self.category_values)

    def select_features(self, features):
        idx = [self.feature_index(f) for f in features]
        cv = None
        if self.category_values is not None:
            cv = tuple(self.category_values[i] for i in idx)
        return Dataset(tuple(self.columns[i] for i in idx),
                       tuple(self.cardinalities[i] for i in idx), self.labels,
                       self.n_classes, self.weights,
                       tuple(self.feature_names[i] for i in idx), self.label_values, cv)

    def with_columns(self, columns, cardinalities, names):
        """Copy with extra columns appended (decode maps are dropped for them)."""
        cv = None
        if self.category_values is not None:
            cv = tuple(self.category_values) + (None,) * len(columns)
        return Dataset(self.columns + tuple(columns),
                       self.cardinalities + tuple(cardinalities), self.labels,
                       self.n_classes, self.weights, self.feature_names + tuple(names),
                       self.label_values, cv)

    def decode_labels(self, codes=None):
        codes = self.labels if codes is None else codes
        if self.label_values is None:
            return [int(c) for c in codes]
        return [self.label_values[c] for c in codes]

    def decode_column(self, i, codes=None):
        codes = self.columns[i] if codes is None else codes
        if self.cardinalities[i] is None:
            return list(codes)
        if self.category_values is None or self.category_values[i] is None:
            return [int(c) for c in codes]
        return [self.category_values[i][c] for c in codes]


def recode(values):
    """Map values to integer codes in order of first appearance.

    Returns ``(codes, distinct)`` with ``distinct[code] == value``.
    """
    table = {}
    codes = np.empty(len(values), dtype=np.int64)
    for k, v in enumerate(values):
        code = table.get(v)
        if code is None:
            code = table[v] = len(table)
        codes[k] = code
    return codes, tuple(table)


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def _infer_kind(values):
    # numeric with at least one non-integer value and >1 distinct value
    # -> continuous; everything else stays categorical
    parsed = [_parse_float(v) for v in values]
    if any(p is None for p in parsed):
        return CATEGORICAL
    finite = [p for p in parsed if math.isfinite(p)]
    if len(finite) != len(parsed):
        return CONTINUOUS  # rejected as non-finite downstream
    if len(set(finite)) <= 1 or all(p.is_integer() for p in finite):
        return CATEGORICAL
    return CONTINUOUS


def load_csv(path, label_column=-1, schema="infer"):
    """Read a header-first, comma-delimited UTF-8 CSV into a :class:`Dataset`.

    ``label_column`` is a header name or an index (negative allowed).
    ``schema`` is ``"infer"`` or a mapping from feature name to
    ``"categorical"`` / ``"continuous"`` (unlisted columns are inferred).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CSVParseError("empty file", row=1) from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CSVParseError(
                    f"expected {len(header)} fields, found {len(row)}", row=lineno)
            for name, value in zip(header, row):
                if value.strip() == "":
                    raise CSVParseError("missing value", row=lineno, column=name)
            rows.append(row)
    if len(set(header)) != len(header):
        raise CSVParseError("duplicate column names in header", row=1)
    if not rows:
        raise CSVParseError("no data rows", row=2)

    if isinstance(label_column, (int, np.integer)):
        if not -len(header) <= label_column < len(header):
            raise CSVParseError(f"label column index {label_column} missing")
        label_idx = label_column % len(header)
    else:
        if label_column not in header:
            raise CSVParseError(f"label column {label_column!r} missing")
        label_idx = header.index(label_column)

    labels, label_values = recode([r[label_idx] for r in rows])

    columns, cards, names, cat_values = [], [], [], []
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        values = [r[j] for r in rows]
        kind = _infer_kind(values)
        if isinstance(schema, dict) and name in schema:
            kind = schema[name]
        elif schema != "infer" and not isinstance(schema, dict):
            raise DataError(f"unsupported schema {schema!r}")
        if kind == CONTINUOUS:
            col = np.empty(len(values))
            for k, v in enumerate(values):
                p = _parse_float(v)
                if p is None:
                    raise CSVParseError(f"cannot parse {v!r} as a number",
                                        row=k + 2, column=name)
                if not math.isfinite(p):
                    raise CSVParseError(f"non-finite value {v!r}", row=k + 2, column=name)
                col[k] = p
            columns.append(col)
            cards.append(None)
            cat_values.append(None)
        elif kind == CATEGORICAL:
            codes, distinct = recode(values)
            columns.append(codes)
            cards.append(len(distinct))
            cat_values.append(distinct)
        else:
            raise DataError(f"unknown column kind {kind!r} for {name!r}")
        names.append(name)

    return Dataset(tuple(columns), tuple(cards), labels, max(len(label_values), 1),
                   None, tuple(names), label_values, tuple(cat_values))


def write_csv(ds, path_or_file, label_name="y"):
    """Write ``ds`` as CSV; continuous values use shortest round-trip repr."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(ds.feature_names) + [label_name])
        decoded = []
        for i in range(ds.n_features):
            if ds.is_categorical(i):
                decoded.append([str(v) for v in ds.decode_column(i)])
            else:
                decoded.append([repr(float(v)) for v in ds.columns[i]])
        labels = [str(v) for v in ds.decode_labels()]
        for k in range(ds.n_samples):
            writer.writerow([col[k] for col in decoded] + [labels[k]])
    finally:
        if own:
            fh.close()


def discretize(ds, bins, strategy="equal-width"):
    """Bin every continuous column into ``bins`` categories.

    Equal-width edges span ``[min, max]`` of the column; equal-frequency edges
    are empirical quantiles.  A constant column becomes a single category.
    """
    if bins < 2:
        raise DataError("bins must be >= 2")
    if strategy not in ("equal-width", "equal-frequency"):
        raise DataError(f"unknown discretization strategy {strategy!r}")
    columns, cards, cat_values = [], [], []
    for i, col in enumerate(ds.columns):
        if ds.is_categorical(i):
            columns.append(col)
            cards.append(ds.cardinalities[i])
            cat_values.append(None if ds.category_values is None else ds.category_values[i])
            continue
        lo, hi = col.min(), col.max()
        if lo == hi:
            columns.append(np.zeros(col.shape[0], dtype=np.int64))
            cards.append(1)
        elif strategy == "equal-width":
            codes = np.floor((col - lo) / (hi - lo) * bins).astype(np.int64)
            columns.append(np.clip(codes, 0, bins - 1))
            cards.append(bins)
        else:
            edges = np.quantile(col, np.arange(1, bins) / bins)
            columns.append(np.searchsorted(edges, col, side="right").astype(np.int64))
            cards.append(bins)
        cat_values.append(None)
    return Dataset(tuple(columns), tuple(cards), ds.labels, ds.n_classes, ds.weights,
                   ds.feature_names, ds.label_values, tuple(cat_values))


# -- tree models -------------------------------------------------------------

@dataclass
class TreeNode:
    """One non-root node of a tree model.

    Discrete nodes carry ``cpt`` with ``cpt[parent_value, value]``.  Gaussian
    nodes draw ``N(mean_scale * parent_value, sigma)``.
    """

    name: str
    parent: Optional[str]  # None means the label
    cpt: Optional[np.ndarray] = None
    mean_scale: float = 1.0
    sigma: float = 1.0

    @property
    def is_discrete(self):
        return self.cpt is not None

    @property
    def cardinality(self):
        return None if self.cpt is None else self.cpt.shape[1]


@dataclass
class TreeModelSpec:
    """Rooted tree with the class label at the root.

    ``nodes`` must be listed so that every parent precedes its children.
    """

    label_prior: np.ndarray
    nodes: list = field(default_factory=list)

    def __post_init__(self):
        self.label_prior = np.asarray(self.label_prior, dtype=np.float64)
        if self.label_prior.ndim != 1 or self.label_prior.size < 1:
            raise DataError("label prior must be a non-empty vector")
        if np.any(self.label_prior < 0) or abs(self.label_prior.sum() - 1) > 1e-9:
            raise DataError("label prior must be a normalized PMF")
        seen = {}
        for node in self.nodes:
            if node.name in seen:
                raise DataError(f"duplicate node {node.name!r}")
            if node.parent is None:
                parent_card = self.label_prior.size
            elif node.parent not in seen:
                raise DataError(f"parent of {node.name!r} must be listed before it")
            else:
                parent_card = seen[node.parent].cardinality
            if node.is_discrete:
                if parent_card is None:
                    raise DataError(f"discrete node {node.name!r} has a continuous parent")
                node.cpt = np.asarray(node.cpt, dtype=np.float64)
                if node.cpt.ndim != 2 or node.cpt.shape[0] != parent_card:
                    raise DataError(f"cpt of {node.name!r} must have {parent_card} rows")
                if np.any(node.cpt < 0) or np.any(np.abs(node.cpt.sum(axis=1) - 1) > 1e-9):
                    raise DataError(f"cpt rows of {node.name!r} must be normalized")
            elif node.sigma <= 0:
                raise DataError(f"sigma of {node.name!r} must be positive")
            seen[node.name] = node

    @property
    def n_classes(self):
        return self.label_prior.size

    @property
    def all_discrete(self):
        return all(n.is_discrete for n in self.nodes)

    def layers(self):
        """Depth of each node below the label (layer 1 = label's children)."""
        depth = {}
        for node in self.nodes:
            depth[node.name] = 1 if node.parent is None else depth[node.parent] + 1
        return [depth[n.name] for n in self.nodes]

    def _parent_index(self, node):
        if node.parent is None:
            return -1
        return [n.name for n in self.nodes].index(node.parent)

    @classmethod
    def from_dict(cls, doc):
        """Build a spec from the JSON document used by the ``synth`` command."""
        nodes = []
        for item in doc.get("nodes", []):
            kind = item.get("kind", "discrete")
            if kind == "discrete":
                nodes.append(TreeNode(item["name"], item.get("parent"),
                                      cpt=np.asarray(item["cpt"], dtype=np.float64)))
            elif kind == "gaussian":
                nodes.append(TreeNode(item["name"], item.get("parent"),
                                      mean_scale=float(item.get("mean_scale", 1.0)),
                                      sigma=float(item.get("sigma", 1.0))))
            else:
                raise DataError(f"unknown node kind {kind!r}")
        return cls(np.asarray(doc["label_prior"], dtype=np.float64), nodes)

    def to_dict(self):
        out = []
        for n in self.nodes:
            if n.is_discrete:
                out.append({"name": n.name, "parent": n.parent, "kind": "discrete",
                            "cpt": n.cpt.tolist()})
            else:
                out.append({"name": n.name, "parent": n.parent, "kind": "gaussian",
                            "mean_scale": n.mean_scale, "sigma": n.sigma})
        return {"label_prior": self.label_prior.tolist(), "nodes": out}


def tree_gaussian_spec():
    """The nine-feature Gaussian tree: x1..x3 hang off y, two children each."""
    nodes = [
        TreeNode("x1", None, mean_scale=1.0),
        TreeNode("x2", None, mean_scale=1 / 1.5),
        TreeNode("x3", None, mean_scale=1 / 2.25),
        TreeNode("x4", "x1"), TreeNode("x5", "x1"),
        TreeNode("x6", "x2"), TreeNode("x7", "x2"),
        TreeNode("x8", "x3"), TreeNode("x9", "x3"),
    ]
    return TreeModelSpec(np.array([0.5, 0.5]), nodes)


def gen_from_spec(spec, n, seed):
    """Ancestral sampling root-to-leaves; deterministic per seed."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    y = rng.choice(spec.n_classes, size=n, p=spec.label_prior)
    values = {None: y}
    columns, cards = [], []
    for node in spec.nodes:
        parent = values[node.parent]
        if node.is_discrete:
            # inverse-CDF draw per row from cpt[parent]
            cdf = np.cumsum(node.cpt, axis=1)
            u = rng.random(n)
            col = (u[:, None] >= cdf[parent][:, :-1]).sum(axis=1).astype(np.int64)
            cards.append(node.cardinality)
        else:
            col = rng.normal(node.mean_scale * parent, node.sigma)
            cards.append(None)
        values[node.name] = col
        columns.append(col)
    return Dataset(tuple(columns), tuple(cards), y, spec.n_classes, None,
                   tuple(n.name for n in spec.nodes))


def gen_tree_synthetic(n, seed):
    """Sample the nine-feature Gaussian tree model with a binary label."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(np.int64)
    x1 = rng.normal(y, 1.0)
    x2 = rng.normal(y / 1.5, 1.0)
    x3 = rng.normal(y / 2.25, 1.0)
    x4 = rng.normal(x1, 1.0)
    x5 = rng.normal(x1, 1.0)
    x6 = rng.normal(x2, 1.0)
    x7 = rng.normal(x2, 1.0)
    x8 = rng.normal(x3, 1.0)
    x9 = rng.normal(x3, 1.0)
    return Dataset.from_continuous(np.stack([x1, x2, x3, x4, x5, x6, x7, x8, x9], axis=1),
                                   y, n_classes=2,
                                   feature_names=tuple(f"x{i}" for i in range(1, 10)))


def enumerate_joint(spec, cap=DEFAULT_ENUMERATION_CAP):
    """Every joint configuration once, weighted by its exact probability."""
    if not spec.all_discrete:
        raise DataError("enumerate_joint requires an all-discrete tree model")
    cards = [spec.n_classes] + [n.cardinality for n in spec.nodes]
    total = math.prod(cards)
    if total > cap:
        raise DataError(f"{total} configurations exceed the enumeration cap {cap}")
    grid = np.array(list(itertools.product(*[range(c) for c in cards])), dtype=np.int64)
    grid = grid.reshape(total, len(cards))
    weights = spec.label_prior[grid[:, 0]].copy()
    for j, node in enumerate(spec.nodes, start=1):
        p = spec._parent_index(node) + 1
        weights *= node.cpt[grid[:, p], grid[:, j]]
    return Dataset(tuple(grid[:, j] for j in range(1, len(cards))), tuple(cards[1:]),
                   grid[:, 0], spec.n_classes, weights,
                   tuple(n.name for n in spec.nodes))


def random_tree_spec(rng, layer1, children_per_node=0, n_classes=2,
                     card_range=(2, 3), noise=0.0, concentration=1.0):
    """Random all-discrete tree; ``noise`` > 0 mixes every layer-2 cpt with uniform.

    Used to generate oracle models for exactness and optimality checks.
    """
    def draw_cpt(rows, card, mix):
        cpt = rng.dirichlet(np.full(card, concentration), size=rows)
        return (1 - mix) * cpt + mix / card

    nodes = []
    names = [f"x{i + 1}" for i in range(layer1 * (1 + children_per_node))]
    it = iter(names)
    layer1_nodes = []
    for _ in range(layer1):
        card = int(rng.integers(card_range[0], card_range[1] + 1))
        node = TreeNode(next(it), None, cpt=draw_cpt(n_classes, card, 0.0))
        nodes.append(node)
        layer1_nodes.append(node)
    for parent in layer1_nodes:
        for _ in range(children_per_node):
            card = int(rng.integers(card_range[0], card_range[1] + 1))
            nodes.append(TreeNode(next(it), parent.name,
                                  cpt=draw_cpt(parent.cardinality, card, noise)))
    prior = rng.dirichlet(np.full(n_classes, 4.0))
    return TreeModelSpec(prior, nodes)
