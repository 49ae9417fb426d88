"""synthdet: synthetic CAD-rendered training data and linear detection.

Pipeline stages, each its own module:

- :mod:`synthdet.mesh` -- OBJ parsing, canonical framing, view presets
- :mod:`synthdet.render` -- software rasterizer and cue configurations
- :mod:`synthdet.dataset` -- pools, manifests, patch and few-shot sampling
- :mod:`synthdet.features` -- HOG descriptors and external feature tables
- :mod:`synthdet.detector` -- linear SVM training and hard-negative mining
- :mod:`synthdet.detect` -- proposals, NMS, whole-image detection
- :mod:`synthdet.evaluation` -- VOC2007-style 11-point AP and mAP
- :mod:`synthdet.experiment` -- declarative ablation runs and reports
"""

from .boxes import BBox, iou
from .mesh import Mesh, ViewPreset, parse_obj
from .render import CueConfig, RenderedImage, render

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CueConfig",
    "Mesh",
    "RenderedImage",
    "ViewPreset",
    "iou",
    "parse_obj",
    "render",
    "__version__",
]
