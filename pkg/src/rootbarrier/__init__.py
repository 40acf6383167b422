"""Root barriers for Markov processes.

Compute the space-time barrier whose hitting time embeds a target law into a
Markov process (random walks, Brownian motion, symmetric stable processes, and
their additive-functional time changes), and verify the embedding by Monte
Carlo simulation of barrier hitting times.
"""

from .barrier import Barrier, barrier_contains, extract_barrier, validate_barrier
from .generators import StabilityError, StepOperator, frac_laplacian_apply
from .grids import GridFn, GridSpec1D
from .measures import Measure, beta_density, beta_measure, bm2d_target_density, dirac, uniform_measure
from .potentials import (
    PotentialFn,
    check_balayage,
    potential_kernel,
    potential_of_measure,
    stable_uniform_potential_closed,
)
from .processes import BmInterval, BmLine, CtmcRandomWalk, Stable, TimeChanged
from .reduite import BalayageError, Obstacle, ValueSurface, dp_reduite, grid_refinement_check, ost_value_oracle
from .pathsim import (
    EmpiricalStats,
    HittingResult,
    PathSample,
    accumulate_additive,
    first_hitting,
    ks_statistic,
    quantile_table,
    run_embedding,
    sample_path,
    stable_no_return_prob,
)

__version__ = "0.1.0"
