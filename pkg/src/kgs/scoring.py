"""Decomposable Gaussian BIC scoring with a per-dataset local-score cache.

Scores follow a higher-is-better convention::

    s(i, Pa) = -(n/2) * (1 + log(2*pi) + log(var_i)) - (|Pa| + 2)/2 * log(n)

where ``var_i`` is the maximum-likelihood residual variance of regressing
column ``i`` on ``Pa`` with an intercept.  That is ``-BIC/2``, so a search
accepts a move when the new score is larger.
"""
from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import CyclicGraph, DataError, DimensionMismatch, ParseError, SingularRegression
from .graph import Pdag, is_acyclic, pdag_to_dag

LOG_2PI = math.log(2.0 * math.pi)
# residual variance below this fraction of the marginal is indistinguishable from the ridge
VAR_FLOOR = 100 * _kernels.RIDGE_REL


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n x d`` observations with one name per column; column j is node j."""

    names: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError("values must be a 2-D array")
        names = tuple(str(n) for n in self.names)
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate variable names: {dup}")
        if values.shape[0] < 2:
            raise DataError("need at least 2 rows")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"non-finite value at row {r + 1}, column {names[c]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "Dataset":
        values = np.asarray(values, dtype=np.float64)
        if names is None:
            names = [f"X{i}" for i in range(values.shape[1])]
        return cls(tuple(names), values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @cached_property
    def covariance(self) -> np.ndarray:
        """Scatter matrix of the mean-centred data divided by n (ML covariance)."""
        x = self.values - self.values.mean(axis=0)
        cov = (x.T @ x) / self.n
        cov.setflags(write=False)
        return cov

    @cached_property
    def scorer(self) -> "GaussianBIC":
        return GaussianBIC(self)


class LocalScoreCache:
    """Map ``(node, sorted parents)`` -> local score; first writer wins."""

    def __init__(self):
        self._entries: dict[tuple[int, tuple[int, ...]], float] = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._entries.get(key)

    def insert(self, key, value: float) -> float:
        with self._lock:
            return self._entries.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries


class GaussianBIC:
    def __init__(self, data: Dataset):
        self.data = data
        self.cov = np.ascontiguousarray(data.covariance)
        self.n = data.n
        self.log_n = math.log(data.n)
        self.cache = LocalScoreCache()
        self.regressions = 0

    def compute(self, node: int, parents: tuple[int, ...]) -> float:
        """Uncached local score."""
        self.regressions += 1
        var = _kernels.residual_variance(self.cov, node, np.asarray(parents, dtype=np.int64))
        if not var > VAR_FLOOR * max(self.cov[node, node], 1e-300):
            raise SingularRegression(
                f"regression of {self.data.names[node]!r} on "
                f"{[self.data.names[p] for p in parents]} is degenerate"
            )
        ll = -0.5 * self.n * (1.0 + LOG_2PI + math.log(var))
        return ll - 0.5 * (len(parents) + 2) * self.log_n

    def local(self, node: int, parents: Iterable[int], use_cache: bool = True) -> float:
        key = (int(node), tuple(sorted(int(p) for p in parents)))
        if key[0] in key[1]:
            raise ValueError(f"node {node} cannot be its own parent")
        if not all(0 <= i < self.data.d for i in (key[0], *key[1])):
            raise ValueError("node index out of range")
        if not use_cache:
            return self.compute(*key)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        return self.cache.insert(key, self.compute(*key))


def local_score(data: Dataset, node: int, parents: Iterable[int] = (), use_cache: bool = True) -> float:
    return data.scorer.local(node, parents, use_cache)


def graph_score(data: Dataset, g: Pdag, use_cache: bool = True) -> float:
    """Sum of local scores over the nodes of a DAG."""
    if g.d != data.d:
        raise DimensionMismatch(f"graph has {g.d} nodes, data has {data.d} columns")
    if g.undirected:
        raise ValueError("graph_score needs a fully directed graph")
    if not is_acyclic(g):
        raise CyclicGraph("cannot score a cyclic graph")
    sc = data.scorer
    return math.fsum(sc.local(i, g.parents(i), use_cache) for i in range(g.d))


def cpdag_score(data: Dataset, c: Pdag) -> float:
    return graph_score(data, pdag_to_dag(c))


# -- CSV ingestion -------------------------------------------------------------
def read_csv(path) -> Dataset:
    """Load a header + numeric-body CSV.  Errors name the offending line and column."""
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh.read(), source=str(path))


def parse_csv(text: str, source: str = "<string>") -> Dataset:
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    if not header or any(not h for h in header):
        raise ParseError(f"{source}: line 1: empty variable name in header")
    if len(set(header)) != len(header):
        raise ParseError(f"{source}: line 1: duplicate variable names in header")
    rows: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{source}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for col, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"{source}: line {lineno}, column {col + 1} ({header[col]!r}): not a number: {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise ParseError(f"{source}: line {lineno}, column {col + 1} ({header[col]!r}): non-finite value")
            vals.append(v)
        rows.append(vals)
    if len(rows) < 2:
        raise ParseError(f"{source}: need at least 2 data rows, got {len(rows)}")
    return Dataset(tuple(header), np.array(rows, dtype=np.float64))


def write_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(data.names)
        for row in data.values:
            w.writerow([repr(float(v)) for v in row])
