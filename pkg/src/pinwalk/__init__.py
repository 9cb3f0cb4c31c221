"""pinwalk: pinned/wetted path measures from a lazy lattice walk.

The measure factorizes into a law on zero sets (a weighted renewal of
contact points) times independent conditioned excursions between them.
This package computes everything about that construction that can be
checked exactly at desk scale - conditioned laws, reflection identities,
ruin probabilities, first-passage asymptotics - and runs seeded Monte Carlo
ensembles with continuity-modulus diagnostics for tightness under diffusive
rescaling.
"""

from .assembly import (
    RescaledPath,
    exact_path_probability,
    iter_ensemble,
    replica_rng,
    rescale,
    sample_polymer,
    zero_set,
)
from .contacts import (
    ContactSet,
    ContactSetLaw,
    CustomWeights,
    DegenerateLawError,
    Disordered,
    Homogeneous,
    Periodic,
    make_law,
    partition_function,
    sample_contact_set,
    set_probability,
)
from .diagnostics import (
    C_functional,
    c_of_a,
    c_table,
    ck_series,
    lemma_bound,
    lemma_table,
    modified_modulus,
    modulus,
    tightness_sweep,
)
from .excursions import (
    ConditionedKernel,
    Excursion,
    build_kernel,
    event_probability,
    path_probability,
    return_law,
    sample_excursion,
)
from .walk import (
    LatticePath,
    WalkParams,
    exact_pmf,
    first_passage_pmf,
    local_clt_deviation,
    pinned_positive_pmf,
    reflection_first_passage,
    ruin_probability,
    step_distribution,
)

__version__ = "0.1.0"
