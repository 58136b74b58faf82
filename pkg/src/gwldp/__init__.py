"""Large deviations for heavy-tailed sums indexed by Galton-Watson processes."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
