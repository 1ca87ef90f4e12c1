"""Multimodal sarcasm recognition with attention-based modality fusion."""

from vyang.tensor import Tensor, ShapeError, no_grad

__all__ = ["Tensor", "ShapeError", "no_grad"]
__version__ = "0.1.0"
