"""Optic disc localization toolkit for retinal fundus images.

Modules:
    imaging     pixel primitives (grayscale, resize, thresholds, morphology,
                connected components)
    localizer   the rule-based disc localization pipeline
    annotation  proposal store, review workflow, ground-truth export
    server      HTTP review service
    evaluation  overlap metrics, classification metrics, ROC/AUC, splits
    synth       procedural synthetic fundus corpus
    cli         command-line front end
    kernels     numba/numpy dual-backend hot loops
"""

__version__ = "0.1.0"

from .geometry import BoundingBox, Circle

__all__ = ["BoundingBox", "Circle", "__version__"]
