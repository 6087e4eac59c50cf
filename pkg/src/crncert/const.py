"""Constants for crncert."""
from typing import Final

SCHEMA_VERSION: Final = 1

# Environment
THREADS_ENV: Final = "CRNCERT_THREADS"

# Analysis defaults
DEFAULT_SEED: Final = 0
DEFAULT_TRIALS: Final = 100
DEFAULT_SIPHON_CAP: Final = 24
EXHAUSTIVE_SIPHON_LIMIT: Final = 16
DEFAULT_SIPHON_NODE_BUDGET: Final = 200_000
DEFAULT_MINOR_CAP: Final = 2_000_000
DEFAULT_BACKTRACK_BRANCHES: Final = 3
DEFAULT_SEARCH_BUDGET: Final = 2_000
SYMBOLIC_SPECIES_LIMIT: Final = 8
DEFAULT_P0_TRIALS: Final = 200
P0_FULL_ENUMERATION_LIMIT: Final = 12
P0_RANDOM_SUBSETS: Final = 500
NONDEGEN_RETRIES: Final = 10
EXACT_MINOR_BOUND: Final = 2.0 ** 40

# Tolerances
STEADY_STATE_TOL: Final = 1e-10
DINI_SLACK: Final = 1e-8
MONOTONE_SLACK: Final = 1e-7
DET_ESS_TOL: Final = 1e-9
P0_TOL: Final = 1e-9
CONSERVATION_TOL: Final = 1e-8
CLIP_TOL: Final = 1e-12
PERSISTENCE_FLOOR: Final = 1e-6
CONVERGENCE_TOL: Final = 1e-6
FD_STEP: Final = 1e-6

# Sampling ranges
RATE_CONSTANT_RANGE: Final = (0.1, 10.0)
JACOBIAN_ENTRY_RANGE: Final = (0.1, 10.0)
TOTAL_RANGE: Final = (0.5, 5.0)
HILL_EXPONENTS: Final = (1, 2)

# Integration
DEFAULT_HORIZON: Final = 200.0
DEFAULT_ATOL: Final = 1e-9
DEFAULT_RTOL: Final = 1e-7
DEFAULT_INITIAL_CONDITIONS: Final = 5
MIN_STEP: Final = 1e-14
MAX_STEPS: Final = 200_000
BLOWUP_LIMIT: Final = 1e12

# Kinetics families
MASS_ACTION: Final = "mass_action"
HILL: Final = "hill"
KINETICS_FAMILIES: Final = (MASS_ACTION, HILL)

# Logging
LOG_MAX_BYTES: Final = 10 * 1024 * 1024
LOG_BACKUP_COUNT: Final = 5
