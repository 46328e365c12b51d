import math

# JSON schema version
SCHEMA_VERSION = 1

# CSV precision (significant digits)
CSV_PRECISION = 17

# Minimum rotational divisions
MIN_ROTATIONAL_DIVISIONS = 3

# Default refinement levels for smooth/discrete comparison
DEFAULT_REFINEMENT_LEVELS = (8, 16, 32, 64)

# Convergence constant observed for the half-dumbbell cone flow
DUMBBELL_TERMINAL_CURVATURE = 1.0547444492811
DUMBBELL_TERMINAL_HEIGHTS = (0.0, 0.455256, 0.738473, 0.874059, 0.940356, 0.978055, 1.00206)

# Grid presets shown with the parametrized families
SPINDLE_GRID_STEP = math.pi / 12
BULGE_GRID_SPAN = math.asin(1 / 1.2)
COSH_GRID_STEP = math.log(1 + math.sqrt(2)) / 4
SINH_GRID_START = math.acosh(2.0)

# Snapshot columns
TRACE_COLUMNS = ("t", "n", "f", "h", "a", "b", "K", "H", "A", "r")
PROFILE_COLUMNS = ("n", "u_n", "f", "h", "a", "b")
COMPARE_COLUMNS = ("M", "u", "f_smooth", "h_smooth", "f_discrete", "h_discrete", "gap")
