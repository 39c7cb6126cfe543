"""Zero-shot classification over precomputed embeddings.

Text proxies are built by retrieving class descriptions against the mean
image embedding; entropic optimal transport turns image/proxy similarities
into row-stochastic pseudo-labels; gradient descent on a KL objective then
learns multimodal proxies that classify across the text/vision gap.
"""

__version__ = "0.1.0"

from .errors import (
    DataError,
    NumericError,
    NumericOverflowError,
    ProxyOTError,
    UsageError,
)
from .fixture import FixtureSpec, generate_fixture, write_fixture
from .learner import (
    LearnConfig,
    LearnTrace,
    ProxyWeights,
    classify,
    gradient,
    learn,
    loss,
)
from .numerics import (
    cosine,
    kl_rows,
    l2_normalize_rows,
    log_sum_exp,
    softmax_rows,
)
from .pipeline import MODES, RunReport, RunSpec, accuracy, bench_solvers, run
from .retrieval import (
    ClassRecord,
    KnowledgeBase,
    RetrievalResult,
    TextProxies,
    build_text_proxies,
    description_proxies,
    mean_image_feature,
    name_proxies,
    retrieve,
    score_descriptions,
    top_k,
)
from .solvers import (
    ALGORITHMS,
    ClassMarginal,
    PseudoLabels,
    SolverConfig,
    TransportPlan,
    entropic_objective,
    marginal_violations,
    pseudo_labels,
    sinkhorn_linear,
    sinkhorn_log,
    solve,
    stable_greenkhorn,
)

__all__ = [
    "__version__",
    "ProxyOTError",
    "UsageError",
    "DataError",
    "NumericError",
    "NumericOverflowError",
    "log_sum_exp",
    "softmax_rows",
    "l2_normalize_rows",
    "cosine",
    "kl_rows",
    "ALGORITHMS",
    "ClassMarginal",
    "SolverConfig",
    "TransportPlan",
    "PseudoLabels",
    "sinkhorn_linear",
    "sinkhorn_log",
    "stable_greenkhorn",
    "solve",
    "marginal_violations",
    "entropic_objective",
    "pseudo_labels",
    "ClassRecord",
    "KnowledgeBase",
    "RetrievalResult",
    "TextProxies",
    "mean_image_feature",
    "score_descriptions",
    "top_k",
    "retrieve",
    "build_text_proxies",
    "description_proxies",
    "name_proxies",
    "ProxyWeights",
    "LearnConfig",
    "LearnTrace",
    "loss",
    "gradient",
    "learn",
    "classify",
    "MODES",
    "RunSpec",
    "RunReport",
    "run",
    "accuracy",
    "bench_solvers",
    "FixtureSpec",
    "generate_fixture",
    "write_fixture",
]
