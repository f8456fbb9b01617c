"""Deep local binary patterns.

Classical LBP codes are stacked into deeper layers by learned orderings over
the code space; the evaluation harness scores the resulting histograms."""

from .architectures import DeepModel, MultiscaleModel, extract, run_deep
from .encoding import CodeImage, NeighborhoodSpec, lbp_encode
from .ordering import Ordering

__version__ = "0.1.0"

__all__ = [
    "CodeImage", "DeepModel", "MultiscaleModel", "NeighborhoodSpec", "Ordering",
    "extract", "lbp_encode", "run_deep",
]
