"""
Application constants
"""

import os

# Get app directory (parent of src directory)
APP_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Config file paths (relative to app directory)
SETTINGS_FILE = os.path.join(APP_DIR, "config", "settings.json")
TOY_DATA_DIR = os.path.join(APP_DIR, "data", "toy")

# Graphs with fewer nodes than this are stored densely
DENSE_NODE_LIMIT = 64

# Relative tolerance for dropping collinear design columns
COLLINEARITY_TOL = 1e-10

# Symmetry / PSD tolerances
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10

DEFAULT_ALPHA = 0.05
DEFAULT_HC5_K = 0.7

# Profile-likelihood search for the network-correlation parameter
THETA_XTOL = 1e-6
THETA_GRID_POINTS = 5

VCOV_KINDS = ("classical", "hc0", "hc1", "hc2", "hc3", "hc4", "hc5", "gls")
ESTIMATORS = ("full", "partial", "naive", "multi")
SIM_ESTIMATORS = ("full", "partial", "naive", "full_gls")
GRAPH_KINDS = ("er", "ba", "ws")
ERROR_KINDS = ("homo", "corr", "none")
OUTPUT_FORMATS = ("json", "csv")
