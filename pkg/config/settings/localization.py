from pathlib import Path

from config.env import BASE_DIR, env

LOCALIZATION_OUTPUT_DIR = Path(env("LOCALIZATION_OUTPUT_DIR", default=str(BASE_DIR / "runs")))
# 0 keeps numba's own thread count
LOCALIZATION_NUM_THREADS = env.int("LOCALIZATION_NUM_THREADS", default=0)
LOCALIZATION_NNF_MAX_CELLS = env.int("LOCALIZATION_NNF_MAX_CELLS", default=2**30)
LOCALIZATION_PROFILE = env("LOCALIZATION_PROFILE", default="indoor")
LOCALIZATION_SEED = env.int("LOCALIZATION_SEED", default=0)
LOCALIZATION_RECORD_RUNS = env.bool("LOCALIZATION_RECORD_RUNS", default=True)
