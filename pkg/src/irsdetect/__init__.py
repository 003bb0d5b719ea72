"""Activity detection for IRS-assisted IoT uplinks: channel simulation,
detection statistics, closed-form performance and a Monte Carlo harness."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
