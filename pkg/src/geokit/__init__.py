"""Numerical L_p Brunn-Minkowski functionals and mixed geominimal surface areas."""

DB_PATH = "data/db/geokit.duckdb"

DEFAULT_RESOLUTION = 256
EPS_CONV = 1e-6
P_BAND = 1e-6
CENTROID_TOL = 1e-8
RECENTER_MAX_ITERS = 50
REPORT_SCHEMA = 1
