# Numeric defaults shared by the decoder, density evolution and simulator.
# Runtime overrides are resolved in config_manager.py.

# Alphabet
MAX_Q = 64
MAX_TABLE_Q = 8
GUARANTEED_TABLE_Q = 6

# Density evolution
DE_MAX_ITERS = 5000
DE_TOL = 1e-10
DE_STALL_STEP = 1e-14
DE_DRIFT_LIMIT = 1e-9
THRESHOLD_PRECISION = 1e-6
REPORT_ENSEMBLES = ((3, 3, 3), (4, 3, 4), (5, 3, 5), (6, 3, 6))
PMF_SUM_TOL = 1e-12
TABLE_CHUNK = 1 << 16

# Subset decoder
DECODER_MAX_ITERS = 200

# Soft node rules
SUPPORT_TOL = 1e-12
CONTRADICTION_FLOOR = 1e-300
EXACT_PERMANENT_MAX = 4

# Graph construction and codeword sampling
GRAPH_MAX_ATTEMPTS = 1000
SAMPLER_NODE_BUDGET = 10**6
SAMPLER_RESTARTS = 100

# Simulation
WILSON_CONFIDENCE = 0.95

# Logging
LOG_LEVEL = "WARNING"
