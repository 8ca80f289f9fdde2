"""Data-driven electricity rate design and robustness auditing.

Pipeline: build a population of load profiles, price the system from a
quadratic cost model, rate each user by marginal cost impact, cluster for
published tariffs (profile-based baseline or rate-band schemes), and audit
how much a strategic user can gain by disguising its profile.
"""

from .errors import (
    ConfigError,
    DegenerateCenters,
    EmptyPopulation,
    GridRatesError,
    InconsistentHorizon,
    InstanceTooLarge,
    KTooLarge,
    MalformedRow,
    PriceWarning,
    RecursionDepthExceeded,
    ZeroProfile,
)
from .model import (
    CostModel,
    PriceCurve,
    SystemLoad,
    billing_identity_check,
    mci,
    mci_matrix,
    price_curve,
    total_cost,
)
from .profiles import (
    CorpusSpec,
    IngestResult,
    LoadProfile,
    NormalizedProfile,
    Population,
    aggregate,
    commercial_spec,
    generate_corpus,
    ingest_csv,
    mean_pairwise_l1,
    normalize,
    normalize_matrix,
    residential_spec,
    write_csv,
)
from .kmeans import Clustering, kmeans_profiles, sigma
from .robust import (
    MciTable,
    RateClustering,
    criterion_check,
    gkc,
    mci_table,
    minimal_clusters_oracle,
    skc,
    write_rate_table,
)
from .vulnerability import (
    DisguiseReport,
    SmoothnessReport,
    count_disguisers,
    disguise_report,
    disguise_reports,
    disguised_profile,
    effort_matrix,
    measure_smoothness,
    min_switch_effort,
    min_switch_effort_strict,
    smoothness_bound,
    switch_efforts,
    switch_margin,
    theta_sweep,
)

__version__ = "0.1.0"
