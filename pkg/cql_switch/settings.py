"""
Configuration and Constants for cql-switch

Preset values from the experiment parameter table.
"""

# Stage Tags
STAGE_EXPULSION = "EXPULSION"
STAGE_TRANSFER = "TRANSFER"
STAGE_ATTRACTION = "ATTRACTION"
STAGE_FREE = "FREE"
STAGE_BALLISTIC = "BALLISTIC"

STAGES = [STAGE_EXPULSION, STAGE_TRANSFER, STAGE_ATTRACTION, STAGE_FREE, STAGE_BALLISTIC]

# Figures
FIG2 = "FIG2"   # expulsion error
FIG3 = "FIG3"   # transfer drift
FIG4 = "FIG4"   # attraction basin
FIG5 = "FIG5"   # ballistic comparison
FIG6 = "FIG6"   # full switching
FIG7 = "FIG7"   # stress test

FIGURES = [FIG2, FIG3, FIG4, FIG5, FIG6, FIG7]

# Shared preset constants
PRESET_D1 = 0.0411
PRESET_D3 = 0.8527
PRESET_D21_T = 6.51     # D2 = D1 + 6.51 * lambda

# Preset rows: D2, alpha_t, beta_e_t, Omega, h2_t (documented only), K
PRESET_TABLE = {
    FIG2: {"D2": 0.1127, "alpha_t": 2.0, "beta_e_t": 3.0, "Omega": 0.0676, "h2_t": -0.4400, "K": 0.07},
    FIG3: {"D2": 0.1127, "alpha_t": 2.0, "beta_e_t": 3.0, "Omega": 0.0676, "h2_t": -0.4400, "K": 0.08},
    FIG4: {"D2": 0.0802, "alpha_t": 4.0, "beta_e_t": None, "Omega": 0.1799, "h2_t": -1.1708, "K": 0.0524},
    FIG5: {"D2": 0.0802, "alpha_t": 4.0, "beta_e_t": 3.0, "Omega": 0.1036, "h2_t": -0.6741, "K": 0.0308},
    FIG6: {"D2": 0.0802, "alpha_t": 2.0, "beta_e_t": 3.0, "Omega": 0.1036, "h2_t": -0.6741, "K": 0.0308},
    FIG7: {"D2": 0.0802, "alpha_t": 2.0, "beta_e_t": 3.0, "Omega": 0.1036, "h2_t": -0.6741, "K": 0.0308},
}

# Values used by the reference runs
REFERENCE_LAMBDAS = {
    FIG2: (0.006, 0.004, 0.001),
    FIG6: (0.002,),
}
REFERENCE_BETA_E = 0.03      # unscaled expulsion current used by the reference runs
REFERENCE_T_E = {FIG2: 2.3372, FIG6: 1.0262}

# Integration defaults
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_DT_EXPORT = 0.05
STOP_TIME_TOL = 1e-10       # bisection tolerance for stop predicates

# Sampled bounds
SAMPLE_LOG2 = 18            # 2**18 Sobol points in the enclosing cube
SAMPLE_LOG2_TRANSFER = 13
TRANSFER_TIME_SAMPLES = 64
BOUND_INFLATION = 1.25
EXPM_GRID = 2001
EXPM_INFLATION = 1.01

# Attraction
CONVERGENCE_FIELD_TOL = 1e-9
CONVERGENCE_STREAK = 3
ATTRACTION_T_MAX_FACTOR = 50.0   # t_max = factor / (alpha_t * lambda)
LYAPUNOV_NOISE = 1e-12
RECIPE_OMEGA_SQ = 52.0 / 75.0

# Transfer
K_SQUARED_RATIO = 10.0     # K**2 < |w1(0)| / ratio
CROSSING_GRID = 256
CROSSING_TOL = 1e-9       # relative to the period 2 pi / omega

# Pipeline
ZERO_RADIUS_TOL = 1e-6
STRESS_FACTORS = (0.98, 1.02)
STRESS_EXPULSION = "EXPULSION_TIME"
STRESS_TRANSFER = "TRANSFER_CLOCK"
RINGING_WINDOW = 150.0
DEFAULT_OFFSET = (-0.1, 0.05, 0.0)   # u0 = s_minus + lambda * offset

# Export
CSV_COLUMNS = ["t", "u1", "u2", "u3", "beta", "stage"]
CONTROL_COLUMNS = ["t", "beta_t"]
REPORT_SCHEMA_VERSION = "1.0"
EXPORT_JSON = "JSON"
EXPORT_CSV = "CSV"

EXPORT_FORMATS = [EXPORT_JSON, EXPORT_CSV]

# Configuration file keys
CONFIG_KEYS = ["d1", "d2", "d3", "alpha_t", "lambda", "omega_cap", "h2_t", "beta_e_t", "k_target"]

# Environment
THREADS_ENV_VAR = "CQL_SWITCH_THREADS"
