"""Density-based hierarchical clustering (HDBSCAN*), built from first principles.

Pipeline: core distances -> mutual reachability -> minimum spanning tree ->
single-linkage hierarchy -> condensed tree -> excess-of-mass cluster selection
with an epsilon merge threshold. Deterministic given input order: MST ties are
broken by index pair. Noise is labeled -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass
class ClusterLabeling:
    labels: np.ndarray            # (N,) int64, -1 for noise
    n_clusters: int
    stabilities: np.ndarray       # (K,) excess-of-mass stability per cluster

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th neighbor, the point itself included."""
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if min_samples > len(dist):
        raise ValueError(f"min_samples={min_samples} exceeds point count {len(dist)}")
    return np.partition(dist, min_samples - 1, axis=1)[:, min_samples - 1]


def mutual_reachability(dist: np.ndarray, min_samples: int) -> np.ndarray:
    core = core_distances(dist, min_samples)
    return np.maximum(np.maximum(core[:, None], core[None, :]), dist)


def minimum_spanning_tree(graph: np.ndarray) -> np.ndarray:
    """Prim-style spanning chain over a dense symmetric weight matrix.

    Edges are recorded as (previously added node, new node, weight) in growth
    order and then sorted by weight; this mirrors the reference HDBSCAN*
    lineage exactly (including its serialization of equal-weight edges), which
    keeps the downstream hierarchy reproducible against it. The weight
    sequence is that of a true minimum spanning tree.
    """
    n = len(graph)
    current_labels = np.arange(n, dtype=np.int64)
    current_node = 0
    min_reach = np.full(n, np.inf)
    edges = np.empty((n - 1, 3))
    for i in range(n - 1):
        keep = current_labels != current_node
        current_labels = current_labels[keep]
        min_reach = np.minimum(min_reach[keep], graph[current_node, current_labels])
        j = int(np.argmin(min_reach))
        edges[i] = (current_node, current_labels[j], min_reach[j])
        current_node = int(current_labels[j])
    return edges[np.argsort(edges[:, 2])]


def single_linkage_tree(edges: np.ndarray, n: int) -> np.ndarray:
    """Edges (sorted by weight) -> scipy-style dendrogram rows [a, b, dist, size]."""
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    slt = np.empty((n - 1, 4))
    for i in range(n - 1):
        a, b, w = int(edges[i, 0]), int(edges[i, 1]), edges[i, 2]
        ra, rb = find(a), find(b)
        node = n + i
        slt[i] = (ra, rb, w, size[ra] + size[rb])
        parent[ra] = parent[rb] = node
        size[node] = size[ra] + size[rb]
    return slt


def _bfs_hierarchy(slt: np.ndarray, n: int, root: int) -> list[int]:
    out = []
    queue = [root]
    while queue:
        out.extend(queue)
        queue = [int(c) for node in queue if node >= n
                 for c in (slt[node - n, 0], slt[node - n, 1])]
    return out


def condense_tree(slt: np.ndarray, n: int, min_cluster_size: int) -> np.ndarray:
    """Collapse the dendrogram into clusters of at least min_cluster_size.

    Rows are (parent, child, lambda, size): child is a condensed cluster id
    (>= n) or a point (< n) that leaves the parent cluster at density lambda.
    """
    root = 2 * n - 2
    relabel = np.full(2 * n - 1, -1, dtype=np.int64)
    relabel[root] = n
    next_label = n + 1
    ignore = np.zeros(2 * n - 1, dtype=bool)
    rows: list[tuple[int, int, float, int]] = []

    for node in _bfs_hierarchy(slt, n, root):
        if ignore[node] or node < n:
            continue
        left, right = int(slt[node - n, 0]), int(slt[node - n, 1])
        dist = slt[node - n, 2]
        lam = 1.0 / dist if dist > 0.0 else np.inf
        left_count = int(slt[left - n, 3]) if left >= n else 1
        right_count = int(slt[right - n, 3]) if right >= n else 1
        label = relabel[node]

        if left_count >= min_cluster_size and right_count >= min_cluster_size:
            for child, count in ((left, left_count), (right, right_count)):
                relabel[child] = next_label
                rows.append((label, next_label, lam, count))
                next_label += 1
        elif left_count < min_cluster_size and right_count < min_cluster_size:
            for child in (left, right):
                for sub in _bfs_hierarchy(slt, n, child):
                    if sub < n:
                        rows.append((label, sub, lam, 1))
                    ignore[sub] = True
        else:
            keep, drop = (left, right) if left_count >= min_cluster_size else (right, left)
            relabel[keep] = label
            for sub in _bfs_hierarchy(slt, n, drop):
                if sub < n:
                    rows.append((label, sub, lam, 1))
                ignore[sub] = True

    return np.array(rows, dtype=[("parent", np.int64), ("child", np.int64),
                                 ("lambda_val", np.float64), ("child_size", np.int64)])


def compute_stability(condensed: np.ndarray, n: int) -> dict[int, float]:
    """Excess-of-mass stability: sum of (lambda_p - lambda_birth) over members."""
    birth: dict[int, float] = {n: 0.0}
    for row in condensed:
        if row["child"] >= n:
            birth[int(row["child"])] = float(row["lambda_val"])
    stability = {c: 0.0 for c in birth}
    for row in condensed:
        p = int(row["parent"])
        lam = row["lambda_val"] if np.isfinite(row["lambda_val"]) else 0.0
        stability[p] += (lam - birth[p]) * row["child_size"]
    return stability


def _cluster_children(condensed: np.ndarray, n: int) -> dict[int, list[int]]:
    children: dict[int, list[int]] = {}
    for row in condensed:
        if row["child"] >= n:
            children.setdefault(int(row["parent"]), []).append(int(row["child"]))
    return children


def _bfs_clusters(children: dict[int, list[int]], start: int) -> list[int]:
    out = []
    queue = [start]
    while queue:
        node = queue.pop()
        out.append(node)
        queue.extend(children.get(node, ()))
    return out


def _select_eom(condensed: np.ndarray, n: int, stability: dict[int, float],
                epsilon: float) -> set[int]:
    children = _cluster_children(condensed, n)
    birth = {int(r["child"]): float(r["lambda_val"]) for r in condensed if r["child"] >= n}
    is_cluster = {c: True for c in stability}
    propagated = dict(stability)
    # Deepest labels first; the root (label n) is never selectable.
    for node in sorted(stability, reverse=True):
        if node == n:
            continue
        subtree = sum(propagated[c] for c in children.get(node, ()))
        if subtree > propagated[node]:
            is_cluster[node] = False
            propagated[node] = subtree
        else:
            for sub in _bfs_clusters(children, node):
                if sub != node:
                    is_cluster[sub] = False
    selected = {c for c, flag in is_cluster.items() if flag and c != n}

    if epsilon > 0.0 and selected:
        parent_of = {int(r["child"]): int(r["parent"]) for r in condensed if r["child"] >= n}

        def climb(leaf: int) -> int:
            parent = parent_of[leaf]
            if parent == n:
                return leaf
            if 1.0 / birth[parent] > epsilon:
                return parent
            return climb(parent)

        merged: set[int] = set()
        processed: set[int] = set()
        for leaf in sorted(selected):
            if 1.0 / birth[leaf] < epsilon:
                if leaf not in processed:
                    target = climb(leaf)
                    merged.add(target)
                    processed.update(_bfs_clusters(children, target))
            else:
                merged.add(leaf)
        selected = merged
    return selected


def _label_points(condensed: np.ndarray, n: int, selected: set[int]) -> np.ndarray:
    """Assign each point to its nearest selected ancestor; root-bound points are noise."""
    parent_map = np.arange(condensed["parent"].max() + 1 if len(condensed) else n + 1,
                           dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent_map[root] != root:
            root = parent_map[root]
        while parent_map[x] != root:
            parent_map[x], x = root, parent_map[x]
        return root

    for row in condensed:
        child = int(row["child"])
        if child not in selected:
            parent_map[find(child)] = find(int(row["parent"]))

    label_of = {c: i for i, c in enumerate(sorted(selected))}
    labels = np.full(n, -1, dtype=np.int64)
    for p in range(n):
        anchor = find(p)
        if anchor in label_of:
            labels[p] = label_of[anchor]
    return labels


def hdbscan(points: np.ndarray, min_samples: int = 5, min_cluster_size: int = 10,
            epsilon: float = 0.0) -> ClusterLabeling:
    """Cluster 3D (or any-dimensional) points; see the module docstring.

    epsilon is the cluster-merge threshold in distance units: selected clusters
    born below it are merged upward into the first ancestor born at or above it.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError("points must be finite")
    n = len(points)
    if n < min_samples:
        raise ValueError(f"need at least min_samples={min_samples} points, got {n}")
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if n < 2:
        raise ValueError("need at least 2 points")

    dist = cdist(points, points)
    mreach = mutual_reachability(dist, min_samples)
    edges = minimum_spanning_tree(mreach)
    slt = single_linkage_tree(edges, n)
    condensed = condense_tree(slt, n, min_cluster_size)
    stability = compute_stability(condensed, n)
    selected = _select_eom(condensed, n, stability, epsilon)
    labels = _label_points(condensed, n, selected)

    stab = np.array([stability[c] for c in sorted(selected)])
    return ClusterLabeling(labels=labels, n_clusters=len(selected), stabilities=stab)
