"""Synthetic ground truths: Erdos-Renyi DAGs and linear-Gaussian SEM data."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .graph import Dag, topological_order, write_edge_list
from .scoring import Dataset, write_csv

# substream indices spawned from the master seed
_STRUCTURE, _WEIGHTS, _NOISE = 0, 1, 2


@dataclass(frozen=True)
class SemConfig:
    d: int
    e_target: float | None = None  # defaults to 2d
    n: int = 1000
    noise_std: float = 1.0
    weight_low: float = 0.5
    weight_high: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.e_target is None:
            object.__setattr__(self, "e_target", float(min(2 * self.d, self.d * (self.d - 1) / 2)))
        if self.d < 1:
            raise ValueError("d must be positive")
        if not 0 <= self.e_target <= self.d * (self.d - 1) / 2:
            raise ValueError(f"e_target={self.e_target} outside [0, d(d-1)/2]")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if not 0 <= self.weight_low < self.weight_high:
            raise ValueError("need 0 <= weight_low < weight_high")
        if self.weight_low == 0:
            raise ValueError("weight_low must be positive so weights are nonzero")

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed).spawn(3)[stream])


@dataclass(frozen=True)
class WeightedDag:
    dag: Dag
    weights: dict  # (parent, child) -> coefficient

    def __post_init__(self):
        if set(self.weights) != set(self.dag.edges):
            raise ValueError("weight keys must equal the edge set")
        if not all(np.isfinite(w) and w != 0 for w in self.weights.values()):
            raise ValueError("weights must be finite and nonzero")

    def matrix(self) -> np.ndarray:
        W = np.zeros((self.dag.d, self.dag.d))
        for (i, j), w in self.weights.items():
            W[i, j] = w
        return W


def random_dag(cfg: SemConfig) -> Dag:
    d = cfg.d
    rng = cfg.rng(_STRUCTURE)
    perm = rng.permutation(d)
    n_pairs = d * (d - 1) // 2
    p = cfg.e_target / n_pairs if n_pairs else 0.0
    draws = rng.random(n_pairs)
    edges = []
    k = 0
    for a in range(d):
        for b in range(a + 1, d):
            if draws[k] < p:
                edges.append((int(perm[a]), int(perm[b])))
            k += 1
    return Dag(d, edges)


def assign_weights(g: Dag, cfg: SemConfig) -> WeightedDag:
    """Magnitudes uniform in [low, high], sign by fair coin; edges visited in sorted order."""
    rng = cfg.rng(_WEIGHTS)
    edges = sorted(g.edges)
    mags = rng.uniform(cfg.weight_low, cfg.weight_high, size=len(edges))
    signs = np.where(rng.random(len(edges)) < 0.5, -1.0, 1.0)
    return WeightedDag(g, {e: float(s * m) for e, s, m in zip(edges, signs, mags)})


def sample_data(w: WeightedDag, cfg: SemConfig, names=None) -> Dataset:
    d = w.dag.d
    rng = cfg.rng(_NOISE)
    X = rng.normal(0.0, cfg.noise_std, size=(cfg.n, d))
    W = w.matrix()
    for j in topological_order(w.dag):
        pa = sorted(w.dag.parents(j))
        if pa:
            X[:, j] += X[:, pa] @ W[pa, j]
    return Dataset.from_array(X, names)


def simulate(cfg: SemConfig) -> tuple[WeightedDag, Dataset]:
    wd = assign_weights(random_dag(cfg), cfg)
    return wd, sample_data(wd, cfg)


def write_simulation(out_dir, cfg: SemConfig, prefix: str = "sim") -> dict:
    """Write ``<prefix>.csv``, ``<prefix>_truth.txt`` and a JSON sidecar; return the sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wd, data = simulate(cfg)
    write_csv(out / f"{prefix}.csv", data)
    write_edge_list(out / f"{prefix}_truth.txt", wd.dag, data.names)
    meta = {"config": asdict(cfg), "realized_edges": len(wd.dag.edges)}
    meta["weights"] = [[data.names[i], data.names[j], w] for (i, j), w in sorted(wd.weights.items())]
    (out / f"{prefix}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta
