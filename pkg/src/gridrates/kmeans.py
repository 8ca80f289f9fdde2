"""Profile-based k-means clustering with per-cluster rates.

Standard Lloyd iteration with k-means++ seeding over normalized profiles.
Users are processed in a canonical id order so results do not depend on
input row order. Assignment distance is squared Euclidean by default; the
disguise analysis uses l1 geometry, so an l1 assignment metric is
available as an option.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyClusterRepairFailed, KTooLarge
from .model import PriceCurve, mci
from .profiles import Population

ASSIGNMENT_METRICS = ("sqeuclidean", "l1")


@dataclass
class Clustering:
    """A partition of users with center profiles and optional cluster rates."""

    user_ids: list
    labels: np.ndarray          # (N,) cluster index per user
    centers: np.ndarray         # (k, T) simplex points
    k: int
    prices: np.ndarray | None = None   # (k,) rate per cluster
    n_iter: int = 0
    inertia: float = 0.0
    metric: str = "sqeuclidean"
    objective_trace: list | None = None  # objective after each assignment step
    label_fixpoint: bool = False         # terminated with labels == argmin(centers)

    @property
    def assignments(self) -> dict:
        return dict(zip(self.user_ids, (int(j) for j in self.labels)))

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)

    def member_ids(self, j: int) -> list:
        return [self.user_ids[i] for i in self.members(j)]

    def to_json(self) -> str:
        clusters = []
        for j in range(self.k):
            idx = self.members(j)
            clusters.append({
                "center": [float(v) for v in self.centers[j]],
                "price": None if self.prices is None else float(self.prices[j]),
                "members": [self.user_ids[i] for i in idx],
            })
        return json.dumps(
            {"kind": "profile", "k": self.k, "metric": self.metric, "clusters": clusters},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Clustering":
        doc = json.loads(text)
        if doc.get("kind") != "profile":
            raise ValueError(f"not a profile clustering: kind={doc.get('kind')!r}")
        user_ids, labels = [], []
        centers, prices = [], []
        have_prices = True
        for j, cluster in enumerate(doc["clusters"]):
            centers.append(cluster["center"])
            if cluster["price"] is None:
                have_prices = False
            else:
                prices.append(cluster["price"])
            for uid in cluster["members"]:
                user_ids.append(uid)
                labels.append(j)
        return cls(
            user_ids=user_ids,
            labels=np.array(labels, dtype=int),
            centers=np.array(centers, dtype=float),
            k=doc["k"],
            prices=np.array(prices) if have_prices else None,
            metric=doc.get("metric", "sqeuclidean"),
        )


def _distances(points: np.ndarray, centers: np.ndarray, metric: str) -> np.ndarray:
    if metric == "sqeuclidean":
        d = (
            (points**2).sum(axis=1)[:, None]
            + (centers**2).sum(axis=1)[None, :]
            - 2.0 * points @ centers.T
        )
        return np.maximum(d, 0.0)
    if metric == "l1":
        return np.abs(points[:, None, :] - centers[None, :, :]).sum(axis=2)
    raise ValueError(f"unknown metric {metric!r}")


def _plusplus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # remaining points coincide with chosen centers; any pick works
            centers[j] = points[rng.integers(n)]
            continue
        centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(labels, dist, centers, points, empty_clusters):
    # move each empty center onto the point farthest from its current center;
    # deterministic and keeps k fixed
    taken = set()
    assigned_dist = dist[np.arange(points.shape[0]), labels]
    order = np.argsort(-assigned_dist, kind="stable")
    for j in empty_clusters:
        for idx in order:
            if int(idx) not in taken and np.sum(labels == labels[idx]) > 1:
                taken.add(int(idx))
                centers[j] = points[idx]
                labels[idx] = j
                break
        else:
            raise EmptyClusterRepairFailed(f"no donor point for empty cluster {j}")
    return labels, centers


def kmeans_profiles(
    pop: Population,
    k: int,
    prices: PriceCurve | None = None,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-9,
    metric: str = "sqeuclidean",
) -> Clustering:
    """Cluster normalized profiles; optionally rate each cluster center.

    Deterministic for a fixed seed, and invariant to input row order: users
    are handled in sorted-id order throughout. Cluster rates, when a price
    curve is given, are the marginal cost impact of each center profile.
    """
    if metric not in ASSIGNMENT_METRICS:
        raise ValueError(f"metric must be one of {ASSIGNMENT_METRICS}")
    if k < 1 or k > pop.n_users:
        raise KTooLarge(f"k={k} outside [1, {pop.n_users}]")

    order = sorted(range(pop.n_users), key=lambda i: pop.user_ids[i])
    ids = [pop.user_ids[i] for i in order]
    points = pop.normalized()[order]

    rng = np.random.default_rng(seed)
    centers = _plusplus_seed(points, k, rng)

    labels = None
    trace = []
    converged = False
    fixpoint = False
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        dist = _distances(points, centers, metric)
        new_labels = dist.argmin(axis=1)
        empty = [j for j in range(k) if not np.any(new_labels == j)]
        repaired = bool(empty)
        if repaired:
            new_labels, centers = _repair_empty(new_labels, dist, centers, points, empty)
        trace.append(float(((points - centers[new_labels]) ** 2).sum()))
        stable = labels is not None and not repaired and np.array_equal(new_labels, labels)
        labels = new_labels
        # at a label fixpoint the entering centers are exactly the member
        # means of the (unchanged) labels, so centers and labels agree
        if stable or (converged and not repaired):
            fixpoint = stable
            break
        new_centers = np.vstack([points[labels == j].mean(axis=0) for j in range(k)])
        converged = np.abs(new_centers - centers).max() < tol
        centers = new_centers
    else:
        centers = np.vstack([points[labels == j].mean(axis=0) for j in range(k)])
    inertia = float(((points - centers[labels]) ** 2).sum())

    cluster_prices = None
    if prices is not None:
        cluster_prices = np.array([mci(prices, c) for c in centers])

    return Clustering(
        user_ids=ids,
        labels=labels,
        centers=centers,
        k=k,
        prices=cluster_prices,
        n_iter=n_iter,
        inertia=inertia,
        metric=metric,
        objective_trace=trace,
        label_fixpoint=fixpoint,
    )


def sigma(clustering, pop: Population) -> np.ndarray:
    """Per-cluster mean l1 distance of member profiles to the cluster center.

    Works for any clustering that can name its members; clusterings without
    stored center profiles get the member mean as center. Values lie in
    [0, 2], the l1 diameter of the simplex.
    """
    weights = pop.normalized()
    row_of = {uid: i for i, uid in enumerate(pop.user_ids)}
    k = clustering.k
    out = np.zeros(k)
    centers = getattr(clustering, "centers", None)
    for j in range(k):
        rows = np.array([row_of[uid] for uid in clustering.member_ids(j)])
        pts = weights[rows]
        center = pts.mean(axis=0) if centers is None else centers[j]
        out[j] = float(np.abs(pts - center).sum(axis=1).mean())
    return out
