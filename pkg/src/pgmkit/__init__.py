"""pgmkit: learning and inference for discrete probabilistic models.

The package covers four graphical-model classes (Bayes nets, Markov nets,
dependency networks, mixtures of trees) and two tractable circuit classes
(arithmetic circuits, sum-product networks), with structure and parameter
learners, exact inference by circuit compilation, approximate inference,
and text file formats for everything.  The ``pgmkit`` command line wraps
each operation as a subcommand.
"""

__version__ = "0.1.0"

from .core import (
    UNKNOWN,
    ContingencyTable,
    Dataset,
    Schema,
    count_marginal,
    empty_evidence,
    mutual_information,
)
from .factors import (
    ConjunctiveFeature,
    Leaf,
    Literal,
    Split,
    TableFactor,
    TreeFactor,
    condition,
    conjunctive_feature,
    dist_leaf,
    factor_log_value,
    marginalize,
    multiply,
    table_from_feature,
    table_from_tree,
    tree_factor,
    weight_leaf,
)
from .models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    MixtureOfTrees,
    bn_to_mn,
    log_likelihood,
    markov_blanket_conditional,
    pseudo_log_likelihood,
    validate,
)
from .circuit import (
    ArithmeticCircuit,
    MpeResult,
    acve_compile,
    differentiate,
    elimination_order,
    evaluate,
    marginals,
    mpe,
    mt_log_prob,
    mt_map,
    mt_marginals,
)
from .spn import (
    SpnLearnOptions,
    SumProductNetwork,
    learn_spn,
    spn_query,
    spn_to_ac,
    validate_spn,
)
from .inference import (
    FactorGraph,
    InferenceOptions,
    MarginalReport,
    factor_graph,
    gibbs,
    icm,
    loopy_bp,
    max_product,
    mean_field,
)
from .learn import (
    LearnOptions,
    OptimOptions,
    ac_ml_params,
    acbn,
    chow_liu,
    learn_bn_tree_cpds,
    learn_dn,
    learn_mt,
    mn_pl_weights,
)
from .diagnostics import AuditTrace, RngHub, seeded_rng
