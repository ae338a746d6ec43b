import numpy as np

# Doctests were written against NumPy 1.x scalar reprs (e.g. ``0.0`` rather
# than ``np.float64(0.0)``).
try:
    np.set_printoptions(legacy="1.25")
except (TypeError, ValueError):
    pass
