"""NSGA-II ranking and crowding for two (or more) minimized objectives."""
from __future__ import annotations

import math

import numpy as np


def dominates(a, b):
    """True if ``a`` is no worse than ``b`` everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def fast_non_dominated_sort(points):
    """Split ``points`` into fronts of indices; front 0 is non-dominated."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n == 0:
        return []
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts = []
    current = [int(i) for i in np.flatnonzero(counts == 0)]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def nsga2_rank(points):
    """Rank per point, starting at 1 for the non-dominated front."""
    ranks = np.zeros(len(points), dtype=np.int64)
    for r, front in enumerate(fast_non_dominated_sort(points), start=1):
        ranks[front] = r
    return ranks


def crowding_distance(points):
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    dist = np.zeros(n)
    if n == 0:
        return dist
    if n <= 2:
        dist[:] = math.inf
        return dist
    for m in range(pts.shape[1]):
        order = np.argsort(pts[:, m], kind="stable")
        lo, hi = pts[order[0], m], pts[order[-1], m]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        gaps = (pts[order[2:], m] - pts[order[:-2], m]) / (hi - lo)
        dist[order[1:-1]] += gaps
    return dist


def select_survivors(points, k):
    """Indices of the ``k`` survivors plus the rank and crowding of every point."""
    n = len(points)
    ranks = np.zeros(n, dtype=np.int64)
    crowd = np.zeros(n)
    chosen = []
    for r, front in enumerate(fast_non_dominated_sort(points), start=1):
        front_pts = [points[i] for i in front]
        cd = crowding_distance(front_pts)
        for i, c in zip(front, cd):
            ranks[i] = r
            crowd[i] = c
        if len(chosen) >= k:
            continue
        if len(chosen) + len(front) <= k:
            chosen.extend(front)
        else:
            # stable sort keeps lower indices first among equal crowding
            order = sorted(range(len(front)), key=lambda t: -cd[t])
            chosen.extend(front[t] for t in order[: k - len(chosen)])
    return chosen, ranks, crowd
