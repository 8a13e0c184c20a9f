import os

# the test matrices are small; on few-core boxes multithreaded BLAS spends
# more time synchronising than computing, and it destabilises the timing
# assertions in the acceptance suite (must be set before numpy loads)
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
