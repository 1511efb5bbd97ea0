"""Regression Monte Carlo solver for finite-horizon robust impulse control
of path-dependent SDEs, with an exact tree-based oracle for Markovian
instances."""

from .bsde import (BackwardConfig, BackwardState, first_hit, solve_bsde,
                   solve_reflected)
from .controls import (EMPTY, INFINITE_DISTANCE, ImpulseSequence, PathBatch,
                       TimeGrid, concat, control_distance, truncate)
from .errors import (BarrierAboveTerminal, ConfigInvalid, DriverNonFinite,
                     IllConditioned, OffTreeImpulse, PolicyRange,
                     ProbabilityOutOfRange, RobustImpulseError,
                     SingularDiffusion)
from .hamiltonian import HamiltonianEval, hamiltonian, minimize_hamiltonian
from .harness import RunConfig, estimate_J, load_config, parse_config, run
from .problems import (ProblemSpec, breve_a, builtin_names, cash1d,
                       make_problem, mart1d, pathdep1d, validate)
from .regression import (Featurizer, ValueSurface, condexp, fit,
                         markov_featurizer, pathdep_featurizer,
                         polynomial_design)
from .simulate import (SimConfig, StrategyTrace, constant_adversary,
                       fixed_sequence_policy, no_impulses, simulate_controlled,
                       simulate_driftless)
from .solver import (DualReport, PicardLevel, RobustSolution, SolverConfig,
                     adversary_from_solution, barrier_values, dual_check,
                     extract_strategy, impulse_policy_from_solution,
                     random_feasible_sequences, solve_robust)
from .tree import TreeSolution, TreeSpec, solve_tree, tree_from_problem

__version__ = "0.1.0"
