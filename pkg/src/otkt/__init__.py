"""Hierarchical optimal-transport knowledge transfer on feature embeddings.

Couples target batches to a bank of labeled source classes through
two-level entropic transport, fuses class-mean knowledge into the target
features on a cosine curriculum, and maintains a momentum-updated
correlation prototype that re-weights unreliable plans at inference.
"""

from .config import RunConfig, format_config, load_config, parse_config
from .cost import cosine_cost, gradient_wrt_features
from .dataio import EmbeddingData, SyntheticSpec, generate, load_embeddings, save_embeddings
from .divergence import divergence_terms, sinkhorn_divergence
from .errors import (
    FormatError,
    NumericalOverflowError,
    SinkhornConvergenceError,
    SizeLimitError,
)
from .exact import exact_ot
from .hot import (
    BatchFeatures,
    ClassBlock,
    HierarchicalResult,
    SourceClassBank,
    aggregate_cost,
    build_bank,
    class_importance,
    hierarchical_ot,
    high_level_ot,
    low_level_ot,
)
from .losses import cross_entropy, total_loss
from .metrics import Metrics, compute_metrics
from .network import Adam, DenseLayer, DenseNetwork
from .pipeline import (
    Model,
    backward_step,
    build_model,
    evaluate,
    infer_batch,
    test_time_xi,
    train,
)
from .prototype import (
    CorrelationPrototype,
    load_prototype,
    momentum_update,
    nearest_prototype_row,
    prototype_diff,
    reweight,
    save_prototype,
)
from .sinkhorn import sinkhorn
from .transfer import (
    CurriculumSchedule,
    curriculum_weight,
    fuse,
    fuse_modalities,
    transfer_features,
)
from .types import CostMatrix, DiscreteDistribution, TransportPlan, transport_objective

__version__ = "0.1.0"
