"""Seeded Lloyd k-means on geographic points.

Coordinates are projected onto a local tangent plane (equirectangular, in
meters) so that centroid updates are plain means and the within-cluster
sum of squares is provably non-increasing per iteration. Initialization
is k-means++ driven by a caller-supplied RNG, so identical seeds yield
identical clusterings.
"""

from __future__ import annotations

import math

import numpy as np

from .network import EARTH_RADIUS_M

MAX_LLOYD_ITERATIONS = 100


def project_to_plane(latlon: np.ndarray, lat0: float) -> np.ndarray:
    """(lat, lon) degrees -> local planar meters around reference latitude."""
    scale = EARTH_RADIUS_M * math.cos(math.radians(lat0))
    x = scale * np.radians(latlon[:, 1])
    y = EARTH_RADIUS_M * np.radians(latlon[:, 0])
    return np.column_stack([x, y])


def plane_to_latlon(points: np.ndarray, lat0: float) -> np.ndarray:
    scale = EARTH_RADIUS_M * math.cos(math.radians(lat0))
    lat = np.degrees(points[:, 1] / EARTH_RADIUS_M)
    lon = np.degrees(points[:, 0] / scale)
    return np.column_stack([lat, lon])


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass sits on existing centers; caller guarantees
            # at least k distinct points, so this cannot strand a center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = points[idx]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def lloyd_kmeans(points: np.ndarray, k: int, rng: np.random.Generator):
    """Cluster ``points`` (N x 2 planar meters) into ``k`` groups.

    Runs k-means++ then Lloyd iterations until no assignment changes or
    100 iterations. Empty clusters keep their previous centroid, which
    preserves WCSS monotonicity.

    Returns
    -------
    (centroids, labels, wcss_history)
        ``wcss_history[t]`` is the within-cluster sum of squared
        distances measured right after the assignment step of iteration
        ``t``; the sequence is non-increasing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(points) < k:
        raise ValueError("need at least k points")
    centers = _kmeans_plus_plus(points, k, rng)
    labels = None
    history = []
    for _ in range(MAX_LLOYD_ITERATIONS):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(points)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return centers, labels, history
