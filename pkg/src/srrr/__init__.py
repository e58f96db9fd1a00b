"""Model selection for row-sparse, reduced-rank multivariate regression."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .criteria import pic_select, scale_free_pic
from .patterns import StructuralPattern, extract_pattern, reduced_rank_refit
from .resampling import make_folds, scv_evaluate

__all__ = [
    "StructuralPattern",
    "extract_pattern",
    "make_folds",
    "pic_select",
    "reduced_rank_refit",
    "scale_free_pic",
    "scv_evaluate",
]
