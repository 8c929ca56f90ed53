"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``KGS_DISABLE_NUMBA=1`` before import to force the numpy path.  Both
implementations are always importable under explicit names so tests and
benchmarks can compare them.
"""
from __future__ import annotations

import os
from itertools import product

import numpy as np

RIDGE_REL = 1e-10
# Parent blocks whose smallest squared Cholesky pivot is below COND_REL * trace
# are solved with the ridge; better-conditioned blocks are solved exactly, which
# keeps the score exactly equivalent across an equivalence class.
COND_REL = 1e-7
# a ridged pivot this close to the ridge means a (near) collinear parent set
PIVOT_FLOOR = 100.0

_disabled = os.environ.get("KGS_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

HAVE_NUMBA = nb is not None
USE_NUMBA = HAVE_NUMBA and not _disabled
BACKEND = "numba" if USE_NUMBA else "numpy"


# -- residual variance of a Gaussian regression -----------------------------
def _chol_numpy(a: np.ndarray):
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    return chol


def residual_variance_numpy(cov: np.ndarray, node: int, parents: np.ndarray) -> float:
    """ML residual variance of ``node`` on ``parents`` from a covariance matrix.

    Returns NaN when the parent block is singular beyond the ridge floor.
    """
    k = parents.shape[0]
    if k == 0:
        return float(cov[node, node])
    a = cov[np.ix_(parents, parents)]
    tr = np.trace(a)
    chol = _chol_numpy(a)
    if chol is None or not np.min(np.diag(chol)) ** 2 > COND_REL * tr:
        ridge = RIDGE_REL * tr
        chol = _chol_numpy(a + ridge * np.eye(k))
        if chol is None or not np.min(np.diag(chol)) ** 2 > PIVOT_FLOOR * ridge:
            return float("nan")
    z = np.linalg.solve(chol, cov[parents, node])
    return float(cov[node, node] - z @ z)


def _residual_variance_py(cov, node, parents):
    # Body shared with the numba kernel; explicit loops keep it njit-compatible.
    k = parents.shape[0]
    if k == 0:
        return cov[node, node]
    a = np.empty((k, k))
    b = np.empty(k)
    tr = 0.0
    for i in range(k):
        b[i] = cov[parents[i], node]
        for j in range(k):
            a[i, j] = cov[parents[i], parents[j]]
        tr += a[i, i]
    ridge = RIDGE_REL * tr
    lower = np.empty((k, k))
    # attempt 0: exact; attempt 1: ridged
    for attempt in range(2):
        floor = COND_REL * tr if attempt == 0 else PIVOT_FLOOR * ridge
        shift = 0.0 if attempt == 0 else ridge
        ok = True
        for j in range(k):
            s = a[j, j] + shift
            for m in range(j):
                s -= lower[j, m] * lower[j, m]
            if not s > floor:
                ok = False
                break
            ljj = np.sqrt(s)
            lower[j, j] = ljj
            for i in range(j + 1, k):
                t = a[i, j]
                for m in range(j):
                    t -= lower[i, m] * lower[j, m]
                lower[i, j] = t / ljj
        if ok:
            quad = 0.0
            z = np.empty(k)
            for i in range(k):
                t = b[i]
                for m in range(i):
                    t -= lower[i, m] * z[m]
                z[i] = t / lower[i, i]
                quad += z[i] * z[i]
            return cov[node, node] - quad
    return np.nan


# -- exhaustive DAG enumeration under edge constraints ------------------------
def _pairs(d: int) -> np.ndarray:
    return np.array([(i, j) for i in range(d) for j in range(i + 1, d)], dtype=np.int64).reshape(-1, 2)


def count_dags_numpy(d: int, codes: np.ndarray) -> int:
    """Count labelled DAGs whose edges respect a knowledge code matrix.

    Each unordered pair takes one of three states (absent, i->j, j->i).
    Code 1 requires the edge in that direction, code 2 forbids that
    direction, code 3 requires adjacency.
    """
    pairs = _pairs(d)
    m = pairs.shape[0]
    if m == 0:
        return 1
    # allowed state choices per pair
    choices = []
    for i, j in pairs:
        opts = []
        for s in (0, 1, 2):
            a, b = (i, j) if s == 1 else (j, i)
            if s == 0:
                if codes[i, j] in (1, 3) or codes[j, i] in (1, 3):
                    continue
            else:
                if codes[a, b] == 2 or codes[b, a] == 1:
                    continue
            opts.append(s)
        choices.append(opts)
    total = 0
    for states in product(*choices):
        adj = np.zeros((d, d), dtype=bool)
        for (i, j), s in zip(pairs, states):
            if s == 1:
                adj[i, j] = True
            elif s == 2:
                adj[j, i] = True
        if _acyclic_numpy(adj):
            total += 1
    return total


def _acyclic_numpy(adj: np.ndarray) -> bool:
    alive = np.ones(adj.shape[0], dtype=bool)
    while alive.any():
        indeg = adj[np.ix_(alive, alive)].sum(axis=0)
        roots = np.flatnonzero(alive)[indeg == 0]
        if roots.size == 0:
            return False
        alive[roots] = False
    return True


def _count_dags_py(d, codes, pairs):
    m = pairs.shape[0]
    total = 0
    n_states = 1
    for _ in range(m):
        n_states *= 3
    child_mask = np.zeros(d, dtype=np.int64)
    for code in range(n_states):
        c = code
        ok = True
        for i in range(d):
            child_mask[i] = 0
        for p in range(m):
            s = c % 3
            c //= 3
            i = pairs[p, 0]
            j = pairs[p, 1]
            if s == 0:
                if codes[i, j] == 1 or codes[i, j] == 3 or codes[j, i] == 1 or codes[j, i] == 3:
                    ok = False
                    break
            elif s == 1:
                if codes[i, j] == 2 or codes[j, i] == 1:
                    ok = False
                    break
                child_mask[i] |= 1 << j
            else:
                if codes[j, i] == 2 or codes[i, j] == 1:
                    ok = False
                    break
                child_mask[j] |= 1 << i
        if not ok:
            continue
        # peel sinks: a node whose children are all removed
        alive = (1 << d) - 1
        progress = True
        while alive != 0 and progress:
            progress = False
            for v in range(d):
                if (alive >> v) & 1 and (child_mask[v] & alive) == 0:
                    alive &= ~(1 << v)
                    progress = True
        if alive == 0:
            total += 1
    return total


if HAVE_NUMBA:
    _residual_variance_nb = nb.njit(cache=True, nogil=True)(_residual_variance_py)
    _count_dags_nb = nb.njit(cache=True, nogil=True)(_count_dags_py)

    def residual_variance_numba(cov: np.ndarray, node: int, parents: np.ndarray) -> float:
        return float(_residual_variance_nb(cov, node, parents))

    def count_dags_numba(d: int, codes: np.ndarray) -> int:
        return int(_count_dags_nb(d, np.ascontiguousarray(codes, dtype=np.int64), _pairs(d)))
else:  # pragma: no cover
    residual_variance_numba = None
    count_dags_numba = None


if USE_NUMBA:
    residual_variance = residual_variance_numba
    count_dags = count_dags_numba
else:
    residual_variance = residual_variance_numpy
    count_dags = count_dags_numpy
