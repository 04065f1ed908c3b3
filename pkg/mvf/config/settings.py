import os
from dotenv import load_dotenv

load_dotenv()

RUNS_DIR = os.getenv("MVF_RUNS_DIR", "runs")
LOG_LEVEL = os.getenv("MVF_LOG_LEVEL", "INFO").upper()
THREADS = int(os.getenv("MVF_THREADS", "1"))
SAMPLES_SCALE = float(os.getenv("MVF_SAMPLES_SCALE", "1.0"))

# numerics
TIME_HORIZON = float(os.getenv("MVF_TIME_HORIZON", "1e6"))
RESCALE_BELOW = float(os.getenv("MVF_RESCALE_BELOW", "1e-6"))
GUARD_REL = float(os.getenv("MVF_GUARD_REL", "1e-8"))
AXIOM_TOL = float(os.getenv("MVF_AXIOM_TOL", "1e-9"))
RANK_REL_TOL = float(os.getenv("MVF_RANK_REL_TOL", "1e-8"))
