"""Min-Max normalization, threshold binarization, and node-level graph metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import ConnectivityMatrix

EIG_TOL = 1e-12
EIG_MAX_ITER = 10_000


@dataclass
class NOM:
    """Min-Max normalized network organization matrix, values in [0, 1]."""

    values: np.ndarray
    method: str = ""
    stage: object = None
    group: object = None
    offset: int | None = None


@dataclass
class BinaryAdjacency:
    a: np.ndarray  # p x p over {0, 1}
    threshold: float

    def __post_init__(self):
        self.a = np.asarray(self.a)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ValueError("adjacency must be square")

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass
class NodeMetrics:
    degree: np.ndarray
    clustering: np.ndarray
    eigenvector: np.ndarray
    betweenness: np.ndarray
    coreness: np.ndarray
    shells: np.ndarray

    BY_NAME = ("degree", "clustering", "eigenvector", "betweenness", "coreness")

    def by_name(self, name: str) -> np.ndarray:
        if name not in self.BY_NAME:
            raise KeyError(f"unknown metric {name!r}")
        return getattr(self, name)


def minmax_normalize(c: ConnectivityMatrix | np.ndarray) -> NOM:
    """Rescale off-diagonal entries to [0, 1]; constant input maps to all zeros."""
    if isinstance(c, ConnectivityMatrix):
        values, meta = c.values, {"method": c.method, "stage": c.stage, "group": c.group, "offset": c.offset}
    else:
        values, meta = np.asarray(c, dtype=float), {}
    if not np.array_equal(values, values.T):
        raise ValueError("connectivity matrix must be symmetric")
    p = values.shape[0]
    off = ~np.eye(p, dtype=bool)
    out = np.zeros_like(values)
    lo, hi = values[off].min(), values[off].max()
    if hi > lo:
        out[off] = (values[off] - lo) / (hi - lo)
    return NOM(values=out, **meta)


def binarize(nom: NOM, threshold: float) -> BinaryAdjacency:
    """Edges where the normalized value is >= the threshold; diagonal stays 0."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1)")
    a = (nom.values >= threshold).astype(np.int8)
    np.fill_diagonal(a, 0)
    return BinaryAdjacency(a=a, threshold=threshold)


def degree(adj: BinaryAdjacency) -> np.ndarray:
    return adj.a.sum(axis=1).astype(float)


def clustering(adj: BinaryAdjacency) -> np.ndarray:
    """C_k = 2 E_k / (D_k (D_k - 1)); zero where the degree is <= 1."""
    a = adj.a.astype(float)
    deg = a.sum(axis=1)
    # E_k = edges among neighbors of k = diag(A^3) / 2
    triangles = np.diag(a @ a @ a) / 2.0
    out = np.zeros(adj.n)
    mask = deg > 1
    out[mask] = 2.0 * triangles[mask] / (deg[mask] * (deg[mask] - 1.0))
    return out


def eigenvector_centrality(adj: BinaryAdjacency) -> np.ndarray:
    """Dominant-eigenvector centrality, unit Euclidean norm, nonnegative.

    Power iteration from the uniform vector on A + I: the identity shift keeps
    the iteration convergent on bipartite graphs (where A itself has a -lambda
    eigenvalue of equal magnitude) without changing the eigenvectors.
    """
    a = adj.a.astype(float)
    if not a.any():
        return np.zeros(adj.n)
    x = np.full(adj.n, 1.0 / np.sqrt(adj.n))
    for _ in range(EIG_MAX_ITER):
        nxt = a @ x + x
        nxt /= np.linalg.norm(nxt)
        if np.max(np.abs(nxt - x)) < EIG_TOL:
            x = nxt
            break
        x = nxt
    return np.abs(x)


def betweenness(adj: BinaryAdjacency) -> np.ndarray:
    """Brandes betweenness over unweighted shortest paths.

    Normalized over ordered pairs: BC_k = (sum over ordered h != j, both != k,
    of path fractions through k) / ((n-1)(n-2)). Disconnected pairs contribute 0.
    """
    n = adj.n
    if n < 3:
        return np.zeros(n)
    neighbors = [np.flatnonzero(adj.a[v]).tolist() for v in range(n)]
    bc = np.zeros(n)
    for s in range(n):
        stack: list[int] = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1)
        dist[s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            v = queue[head]
            head += 1
            stack.append(v)
            for w in neighbors[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        for w in reversed(stack):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / ((n - 1) * (n - 2))


def shell_indices(adj: BinaryAdjacency) -> np.ndarray:
    """k-core shell index per node by iterative peeling."""
    deg = adj.a.sum(axis=1).astype(int)
    shells = np.zeros(adj.n, dtype=int)
    alive = np.ones(adj.n, dtype=bool)
    k = 0
    while alive.any():
        k = max(k, int(deg[alive].min()))
        while alive.any():
            peel = np.flatnonzero(alive & (deg <= k))
            if len(peel) == 0:
                break
            for v in peel:
                shells[v] = k
                alive[v] = False
                deg[np.flatnonzero(adj.a[v] & alive)] -= 1
    return shells


def coreness_centrality(adj: BinaryAdjacency) -> np.ndarray:
    """Sum of the shell indices of each node's neighbors."""
    return (adj.a @ shell_indices(adj)).astype(float)


def node_metrics(adj: BinaryAdjacency) -> NodeMetrics:
    shells = shell_indices(adj)
    return NodeMetrics(
        degree=degree(adj),
        clustering=clustering(adj),
        eigenvector=eigenvector_centrality(adj),
        betweenness=betweenness(adj),
        coreness=(adj.a @ shells).astype(float),
        shells=shells,
    )
