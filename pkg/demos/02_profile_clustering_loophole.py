"""Why tariffs clustered on raw profiles invite strategic disguising.

Group users by profile shape, price each group at its center's rate, and
boundary users can blend a little of a cheaper group's shape into their
reported profile to switch groups. This script measures how cheap those
switches are and how much money they move.
"""

import numpy as np

from gridrates import (
    CostModel,
    aggregate,
    count_disguisers,
    disguise_reports,
    generate_corpus,
    kmeans_profiles,
    measure_smoothness,
    price_curve,
    residential_spec,
    smoothness_bound,
)

spec = residential_spec(n_users=2000, seed=7, total_range=(4000.0, 9000.0))
pop = generate_corpus(spec)
prices = price_curve(CostModel(0.00012, -37.38), aggregate(pop))

clustering = kmeans_profiles(pop, k=24, prices=prices, seed=7)
order = np.argsort(clustering.prices)
print(f"profile-based tariff, k={clustering.k}")
print(f"cluster rates: {clustering.prices[order[0]]:.2f} .. {clustering.prices[order[-1]]:.2f}")

# survey every user's cheapest admissible switch
theta = 0.05  # willing to alter 5% of the reported shape
reports = disguise_reports(clustering, theta, pop=pop)
movable = [r for r in reports if r.cr <= theta]
best = max(movable, key=lambda r: r.benefit)
print(f"\nat effort threshold {theta:.0%}:")
print(f"  {len(movable)} of {pop.n_users} users can switch to a cheaper cluster")
print(f"  largest per-unit saving: {best.benefit:.2f} "
      f"(user {best.user_id}, effort {best.cr:.3f})")

counts, pct = count_disguisers(clustering, theta, pop=pop)
print(f"  strategic users: {pct:.1f}% of the population")
print(f"  per-cluster counts: {counts.tolist()}")

# sweep the effort threshold: more tolerance, more strategic users
print("\ntheta   strategic %")
for theta in (0.01, 0.02, 0.05, 0.10, 0.20):
    _, pct = count_disguisers(clustering, theta, pop=pop)
    print(f"{theta:5.2f}   {pct:6.2f}")

# the gap a disguiser can reach vs what a rate-band scheme would certify
rho = 0.5
audit = measure_smoothness(clustering, theta=0.05, pop=pop)
bound = smoothness_bound(rho, 0.05)
print(f"\nworst reachable rate gap: {audit.delta_observed:.2f}")
print(f"rate-band guarantee at rho={rho}: {bound:.2f}")
print(f"loophole factor: {audit.delta_observed / bound:.1f}x")
