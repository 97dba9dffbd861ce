"""storyqg: educational question generation for narrative text.

Three-stage pipeline: question-type distribution learning, control-signal
conditioned event summarization over a discourse-aware token graph, and
question generation. Built on a small float64 autodiff core with a compiled
kernel backend and a pure-numpy fallback.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
