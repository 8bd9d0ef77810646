"""Configuration for the monogamy_qkd toolkit.

Central location for numerical tolerances, solver settings, simulation
defaults and the CLI exit-code table.

USAGE:
------
Run the command-line front end from the project root:

  python3 cli_app.py critical-beta ns        # NS threshold, 5/6
  python3 cli_app.py curve --step 0.001      # monogamy curves as CSV
  python3 cli_app.py lp-verify --step 0.05   # NS tightness oracle
  python3 cli_app.py simulate --beta 0.9 --rounds 100000 --seed 7

A few values can be overridden through the environment or a .env file:

  MONOGAMY_QKD_LOG_LEVEL=DEBUG
  MONOGAMY_QKD_WORKERS=4
  MONOGAMY_QKD_LP_METHOD=highs-ds
"""

import math
import os

from dotenv import load_dotenv

load_dotenv()

# ============================================================================
# Numerical Tolerances
# ============================================================================

# Normalization and no-signaling checks on probability tables
PROBABILITY_TOLERANCE = 1e-9

# Algebraic identities (flip symmetry, affinity under mixing, ...)
ALGEBRAIC_TOLERANCE = 1e-12

# Entries in [-NEGATIVE_CLAMP, 0) are rounding noise and get clamped to 0
NEGATIVE_CLAMP = 1e-12

# ============================================================================
# Physical Constants
# ============================================================================

# Highest CHSH value reachable with quantum resources
TSIRELSON_BOUND = (1 + 1 / math.sqrt(2)) / 2

# Classical (local deterministic) CHSH bound
CLASSICAL_BOUND = 0.75

# Value of the sufficient-condition line at the Tsirelson bound
TSIRELSON_LINE_VALUE = (1 + 1 / (2 * math.sqrt(2))) / 2

# ============================================================================
# Root Finding
# ============================================================================

BISECTION_XTOL = 1e-12
BISECTION_MAXITER = 200

# Grid used for sampled monotonicity checks of monogamy functions
MONOTONICITY_GRID_STEP = 1e-3

# ============================================================================
# Linear Programming
# ============================================================================

# Any method accepted by scipy.optimize.linprog
LP_METHOD = os.getenv("MONOGAMY_QKD_LP_METHOD", "highs")

# Feasibility / objective agreement of LP solutions
LP_TOLERANCE = 1e-7

# Allowed distance between LP optimum and the analytic NS trade-off
TIGHTNESS_TOLERANCE = 1e-6

# ============================================================================
# Protocol Simulation
# ============================================================================

MIN_ROUNDS = 100
MIN_ESTIMATION_ROUNDS = 30

# Rounds per independently seeded RNG stream. Changing it changes the
# simulated bits for a given seed.
STREAM_BLOCK_ROUNDS = 50_000

DEFAULT_WORKERS = int(os.getenv("MONOGAMY_QKD_WORKERS", "1"))

DEFAULT_ROUNDS = 100_000
DEFAULT_ESTIMATION_FRACTION = 0.5
DEFAULT_SEED = 42

# Statistical slack (in standard errors) when comparing empirical rates
SIGMA_SLACK = 5.0

# ============================================================================
# Output
# ============================================================================

CSV_FLOAT_FORMAT = ".10g"
CRITICAL_BETA_DECIMALS = 10

LOG_LEVEL = os.getenv("MONOGAMY_QKD_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# ============================================================================
# CLI Exit Codes
# ============================================================================

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID_BOX = 3
EXIT_INSECURE = 4
EXIT_ORACLE_MISMATCH = 5
