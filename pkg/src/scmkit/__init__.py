"""Exact causal inference engine over finite discrete structural causal models.

Assumptions go in as a causal graph, queries in the three-layer hierarchy go
in as text, data go in as categorical tables; out come a symbolic estimand
(or a certified refusal), a plug-in estimate with confidence, and fit
indices.  Counterfactual, mediation, missing-data and discovery tooling round
out the engine at desk scale.
"""

__version__ = "0.1.0"

from .graph import Admg, CiStatement, c_components, d_separated, parse_graph, serialize_graph, testable_implications
from .expr import (
    JointTable,
    ProbTerm,
    Sum,
    Product,
    Quotient,
    One,
    ONE,
    Val,
    eval_estimand,
    parse_estimand,
    render,
    simplify,
)
from .scm import (
    CounterfactualQuery,
    DiscreteScm,
    EndogenousVar,
    ExogenousVar,
    counterfactual_query,
    intervene,
    joint_counterfactual,
    latent_projection,
    observational_joint,
    parse_scm,
    sample,
    serialize_scm,
)
from .identify import (
    CausalQuery,
    Identified,
    NonIdentifiable,
    QueryTerm,
    backdoor_sets,
    identify,
    nonidentifiability_witness,
    parse_query,
    query_layer,
)
