"""Strategic disguising against a cluster tariff, and smoothness auditing.

A user can mimic another cluster by blending its normalized profile toward
that cluster's representative: blend(mu) = (1-mu)*d + mu*c. The minimal
blend weight that gets the user admitted to the target cluster is its
switch effort. Admission follows the clustering's own assignment rule:

* profile clusterings admit the blend once it is at least as close (l1) to
  the target center as to the user's own center;
* rate-band clusterings admit the blend once its billed rate is within the
  band tolerance of the target price.

Both admission tests reduce to piecewise-linear (or closed-form) problems
in mu, so efforts are computed exactly rather than by search.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCenters
from .profiles import NormalizedProfile, Population
from .robust import RateClustering

_INF = float("inf")


# ---------------------------------------------------------------------------
# Switch effort, profile-assignment geometry
# ---------------------------------------------------------------------------

def _weights_of(d) -> np.ndarray:
    return np.asarray(getattr(d, "weights", d), dtype=float)


def switch_margin(d, c_own, c_target, mu: float) -> float:
    """Admission margin at blend weight mu; >= 0 means the switch succeeds.

    margin(mu) = ||(1-mu)d + mu*c_t - c_o||_1 - (1-mu)*||d - c_t||_1,
    i.e. distance kept from the own center minus distance left to the
    target. Convex and piecewise linear in mu, positive at mu=1.
    """
    d = _weights_of(d)
    c_own = np.asarray(c_own, float)
    c_target = np.asarray(c_target, float)
    blend = (1.0 - mu) * d + mu * c_target
    return float(np.abs(blend - c_own).sum() - (1.0 - mu) * np.abs(d - c_target).sum())


def _first_crossing(candidates: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Per row: smallest mu with value >= 0, interpolating inside segments.

    `candidates` must be sorted ascending per row and contain every
    breakpoint of the piecewise-linear margin, so values are linear between
    consecutive candidates and the first sign change pins the crossing.
    """
    feasible = values >= 0.0
    first = feasible.argmax(axis=1)
    out = np.take_along_axis(candidates, first[:, None], axis=1).ravel().copy()
    interior = first > 0
    if np.any(interior):
        idx = first[interior]
        rows = np.flatnonzero(interior)
        hi_mu = candidates[rows, idx]
        lo_mu = candidates[rows, idx - 1]
        hi_f = values[rows, idx]
        lo_f = values[rows, idx - 1]
        denom = hi_f - lo_f
        cross = lo_mu + (hi_mu - lo_mu) * (-lo_f) / denom
        out[interior] = cross
    return out


def switch_efforts(d, c_own, targets: np.ndarray) -> np.ndarray:
    """Minimal blend weights admitting `d` to each target center.

    Exact: the margin's only breakpoints in mu are where a coordinate of
    the blended gap to the own center changes sign, so scanning the sorted
    breakpoints finds the first up-crossing analytically.
    """
    d = _weights_of(d)
    c_own = np.asarray(c_own, float)
    targets = np.atleast_2d(np.asarray(targets, float))
    m, horizon = targets.shape

    a = d - c_own                      # gap to own center at mu=0
    b = targets - d[None, :]           # per-target blend direction
    s = np.abs(b).sum(axis=1)          # ||d - c_target||_1

    with np.errstate(divide="ignore", invalid="ignore"):
        breakpoints = np.where(b != 0.0, -a[None, :] / b, np.inf)
    breakpoints = np.where(
        (breakpoints > 0.0) & (breakpoints < 1.0), breakpoints, 1.0
    )
    candidates = np.concatenate(
        [np.zeros((m, 1)), breakpoints, np.ones((m, 1))], axis=1
    )
    candidates.sort(axis=1)

    # margin at every candidate: sum_t |a_t + mu*b_t| - (1-mu)*s
    blend_gap = np.abs(a[None, None, :] + candidates[:, :, None] * b[:, None, :])
    values = blend_gap.sum(axis=2) - (1.0 - candidates) * s[:, None]
    return _first_crossing(candidates, values)


def min_switch_effort(d, c_own, c_target) -> float:
    """Minimal blend weight in [0, 1] that admits `d` to the target cluster.

    A user sitting exactly on its own center needs mu = 0.5; a user already
    on the target center needs 0. Raises DegenerateCenters when the two
    centers coincide and the test is vacuous.
    """
    c_own = np.asarray(c_own, float)
    c_target = np.asarray(c_target, float)
    if np.array_equal(c_own, c_target):
        raise DegenerateCenters("own and target centers are identical")
    return float(switch_efforts(d, c_own, c_target[None, :])[0])


def min_switch_effort_strict(d, centers: np.ndarray, own: int, target: int) -> float:
    """Minimal blend weight making the target the nearest center of all.

    Stricter than the pairwise admission test: the blend must beat every
    other center, not only the user's own. Piecewise-linear scan over the
    union of all pairwise breakpoints.
    """
    d = _weights_of(d)
    centers = np.asarray(centers, float)
    if np.array_equal(centers[own], centers[target]):
        raise DegenerateCenters("own and target centers are identical")
    others = [j for j in range(centers.shape[0]) if j != target]
    c_t = centers[target]
    b = c_t - d

    def margins(mu):
        blend = (1.0 - mu) * d + mu * c_t
        to_target = np.abs(blend - c_t).sum()
        return np.array([np.abs(blend - centers[j]).sum() - to_target for j in others])

    cuts = {0.0, 1.0}
    for j in others:
        a_j = d - centers[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            bp = np.where(b != 0.0, -a_j / b, np.inf)
        cuts.update(float(v) for v in bp[(bp > 0.0) & (bp < 1.0)])
    # breakpoints of the target's own term |(1-mu)(d-c_t)| never occur in (0,1)
    grid = sorted(cuts)

    lo_vals = margins(grid[0])
    for seg in range(len(grid) - 1):
        lo_mu, hi_mu = grid[seg], grid[seg + 1]
        hi_vals = margins(hi_mu)
        lower, upper = lo_mu, hi_mu
        feasible = True
        for g_lo, g_hi in zip(lo_vals, hi_vals):
            if g_lo >= 0.0 and g_hi >= 0.0:
                continue
            if g_lo < 0.0 and g_hi < 0.0:
                feasible = False
                break
            root = lo_mu + (hi_mu - lo_mu) * (-g_lo) / (g_hi - g_lo)
            if g_lo < 0.0:
                lower = max(lower, root)
            else:
                upper = min(upper, root)
        if feasible and lower <= upper:
            return float(lower)
        lo_vals = hi_vals
    return 1.0


def disguised_profile(d, c_target, mu: float):
    """Blend of a profile toward a target center; stays on the simplex."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    weights = _weights_of(d)
    blend = (1.0 - mu) * weights + mu * np.asarray(c_target, float)
    if isinstance(d, NormalizedProfile):
        return NormalizedProfile(d.user_id, blend)
    return blend


# ---------------------------------------------------------------------------
# Efforts against a whole clustering (profile- or rate-assigned)
# ---------------------------------------------------------------------------

def effort_matrix(clustering, pop: Population | None = None, strict: bool = False):
    """(user_ids, efforts, labels, prices) for every user/target pair.

    efforts[i, n] is user i's minimal blend weight into cluster n; the own
    column is +inf (not a target). Profile clusterings need the population
    for the member profiles; rate-band clusterings carry their own rates.
    """
    if isinstance(clustering, RateClustering):
        mcis = clustering.mcis
        prices = clustering.prices
        gap = np.abs(mcis[:, None] - prices[None, :])
        with np.errstate(divide="ignore"):
            efforts = np.maximum(0.0, 1.0 - clustering.rho / gap)
        efforts[np.arange(mcis.size), clustering.labels] = _INF
        return clustering.user_ids.tolist(), efforts, clustering.labels.copy(), prices

    if pop is None:
        raise ValueError("profile clusterings need the population for efforts")
    if clustering.prices is None:
        raise ValueError("clustering has no cluster rates; cluster with a price curve")
    row_of = {uid: i for i, uid in enumerate(pop.user_ids)}
    weights = pop.normalized()
    ids = list(clustering.user_ids)
    labels = clustering.labels
    centers = clustering.centers
    k = clustering.k
    efforts = np.full((len(ids), k), _INF)
    for i, uid in enumerate(ids):
        own = int(labels[i])
        d = weights[row_of[uid]]
        others = [n for n in range(k) if n != own]
        usable = [n for n in others if not np.array_equal(centers[n], centers[own])]
        if strict:
            for n in usable:
                efforts[i, n] = min_switch_effort_strict(d, centers, own, n)
        elif usable:
            efforts[i, usable] = switch_efforts(d, centers[own], centers[usable])
    return ids, efforts, labels.copy(), clustering.prices


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class DisguiseReport:
    """Per-user disguise analysis against one clustering at threshold theta."""

    user_id: str
    own_cluster: int
    cr: float                      # minimal effort over cheaper targets; +inf if none
    best_target: int | None
    mu_per_target: dict            # target cluster -> minimal admission effort
    benefit: float                 # best rate saving among targets reachable at theta
    theta: float

    def row(self):
        return (
            self.user_id,
            None if self.cr == _INF else self.cr,
            self.best_target,
            self.benefit,
        )


@dataclass
class SmoothnessReport:
    """Largest rate gap reachable by disguising at effort threshold theta."""

    delta_observed: float
    theta: float
    pairs: list = field(default_factory=list)        # (user_id, target, gap)
    violations: list = field(default_factory=list)   # pairs with gap > bound
    bound: float | None = None


def _reports_from_matrix(ids, efforts, labels, prices, theta) -> list:
    reports = []
    for i, uid in enumerate(ids):
        own = int(labels[i])
        own_price = prices[own]
        mu_row = efforts[i]
        cheaper = np.flatnonzero(prices < own_price)
        cr = _INF
        best = None
        if cheaper.size:
            mus = mu_row[cheaper]
            cr = float(mus.min())
            if cr < _INF:
                tied = cheaper[mus == cr]
                best = int(tied[np.lexsort((tied, prices[tied]))[0]])
        reachable = cheaper[mu_row[cheaper] <= theta] if cheaper.size else cheaper
        benefit = float((own_price - prices[reachable]).max()) if reachable.size else 0.0
        mu_per_target = {
            int(n): float(mu_row[n])
            for n in range(prices.size)
            if n != own and mu_row[n] < _INF
        }
        reports.append(DisguiseReport(
            user_id=str(uid),
            own_cluster=own,
            cr=cr,
            best_target=best,
            mu_per_target=mu_per_target,
            benefit=benefit,
            theta=theta,
        ))
    return reports


def disguise_report(clustering, user_id: str, theta: float,
                    pop: Population | None = None, strict: bool = False) -> DisguiseReport:
    """Disguise analysis for a single user (convenience over the matrix)."""
    reports = disguise_reports(clustering, theta, pop=pop, strict=strict)
    for rep in reports:
        if rep.user_id == str(user_id):
            return rep
    raise KeyError(f"user {user_id!r} not in clustering")


def disguise_reports(clustering, theta: float,
                     pop: Population | None = None, strict: bool = False) -> list:
    """Per-user reports, ordered by user id."""
    _check_theta(theta)
    ids, efforts, labels, prices = effort_matrix(clustering, pop, strict=strict)
    reports = _reports_from_matrix(ids, efforts, labels, prices, theta)
    return sorted(reports, key=lambda r: r.user_id)


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta must be in [0, 1), got {theta}")


def count_disguisers(clustering, theta: float,
                     pop: Population | None = None, strict: bool = False):
    """Per-cluster counts of members able to disguise at threshold theta.

    Returns (counts, percentage of all users). A user counts when the
    cheapest admission effort over lower-priced clusters is <= theta.
    """
    _check_theta(theta)
    ids, efforts, labels, prices = effort_matrix(clustering, pop, strict=strict)
    counts, pct = _counts_at(efforts, labels, prices, theta)
    return counts, pct


def _cr_vector(efforts, labels, prices) -> np.ndarray:
    cheaper = prices[None, :] < prices[labels][:, None]
    masked = np.where(cheaper, efforts, _INF)
    return masked.min(axis=1)


def _counts_at(efforts, labels, prices, theta):
    cr = _cr_vector(efforts, labels, prices)
    able = cr <= theta
    counts = np.bincount(labels[able], minlength=prices.size)
    return counts, 100.0 * able.sum() / cr.size


def theta_sweep(clustering, thetas, pop: Population | None = None, strict: bool = False):
    """Strategic-user percentages and per-cluster counts over a theta grid.

    Efforts are computed once; each row of the result is
    (theta, percentage, counts per cluster).
    """
    ids, efforts, labels, prices = effort_matrix(clustering, pop, strict=strict)
    rows = []
    for theta in thetas:
        _check_theta(theta)
        counts, pct = _counts_at(efforts, labels, prices, theta)
        rows.append((float(theta), pct, counts))
    return rows


def measure_smoothness(clustering, theta: float, pop: Population | None = None,
                       bound: float | None = None, strict: bool = False) -> SmoothnessReport:
    """Audit the worst rate gap a disguiser can reach at threshold theta.

    delta_observed is the maximum |own price - target price| over all users
    and all cheaper clusters they can be admitted to with effort <= theta;
    0 when nobody can move. Pairs exceeding `bound` (when given) are listed
    as violations.
    """
    _check_theta(theta)
    ids, efforts, labels, prices = effort_matrix(clustering, pop, strict=strict)
    own_prices = prices[labels]
    reachable = (efforts <= theta) & (prices[None, :] < own_prices[:, None])
    gaps = own_prices[:, None] - prices[None, :]
    pairs = [
        (str(ids[i]), int(n), float(gaps[i, n]))
        for i, n in zip(*np.nonzero(reachable))
    ]
    delta = max((g for _, _, g in pairs), default=0.0)
    violations = []
    if bound is not None:
        violations = [p for p in pairs if p[2] > bound]
    return SmoothnessReport(
        delta_observed=float(delta),
        theta=float(theta),
        pairs=pairs,
        violations=violations,
        bound=bound,
    )


def smoothness_bound(rho: float, theta: float) -> float:
    """Price-gap guarantee for any clustering meeting the rate-band criterion."""
    _check_theta(theta)
    return rho * (1.0 + 1.0 / (1.0 - theta))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def reports_to_json(reports) -> str:
    docs = []
    for r in reports:
        docs.append({
            "user_id": r.user_id,
            "own_cluster": r.own_cluster,
            "cr": None if r.cr == _INF else r.cr,
            "best_target": r.best_target,
            "benefit": r.benefit,
            "theta": r.theta,
            "mu_per_target": {str(n): mu for n, mu in sorted(r.mu_per_target.items())},
        })
    return json.dumps(docs, sort_keys=True)


def write_reports_csv(reports, path, fmt: str = "%.9g") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("user_id,cr,best_target,benefit\n")
        for r in reports:
            uid, cr, best, benefit = r.row()
            cr_s = "" if cr is None else fmt % cr
            best_s = "" if best is None else str(best)
            fh.write(f"{uid},{cr_s},{best_s},{fmt % benefit}\n")
