"""Global constants for tridesign.

Numeric defaults shared by several modules live here so that tolerances are
tuned in one place. Functions accept keyword overrides where a caller may need
a different trade-off.
"""

from __future__ import annotations

# Quadrature
GL_ORDER = 64
QUAD_RTOL = 1e-10
QUAD_MAX_DOUBLINGS = 8
TRIANGLE_MAX_DOUBLINGS = 3

# Validation and root finding
VALIDATION_GRID = 1024
BISECTION_RTOL = 1e-12
BISECTION_MAX_ITER = 200
Q_GAP_RTOL = 1e-12
VANISHING_TOL = 1e-14
GRAM_DET_MIN = 1e-12
DOOB_RANGE_RTOL = 1e-9
LOEWNER_TOL = 1e-10
CONDITION_MAX = 1e13

# Discretization
CDF_CELLS = 512
CDF_CELL_ORDER = 16
DENSITY_ZERO_RTOL = 1e-12

# Simulation
MC_BLOCK_SIZE = 4096
DEFAULT_RESTARTS = 10

# Output
SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = "%.12g"

HDF5_ROOT_GROUP = "studies"
HDF5_PARAMETERS_GROUP = "parameters"
HDF5_RESULTS_GROUP = "results"
HDF5_RUNS_GROUP = "runs"
